#![allow(dead_code)]

use klbound::pacbayes::{Sample, Scenario};
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::from_json(&read_fixture(name)).unwrap()
}

pub fn sample(name: &str) -> Sample {
    serde_json::from_str(&read_fixture(name)).unwrap()
}
