//! `klbound` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or validation errors, 2 when a
//! command ran but one of its invariant gates failed.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "klbound", version, about = "Exponential-moment inequalities and PAC-Bayes certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Binary relative entropy kl(p, q).
    Kl {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// Upper (default) or lower inverse of kl(qhat, ·) at a budget.
    Klinv {
        #[arg(long)]
        qhat: f64,
        /// Non-negative; `inf` is accepted.
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        lower: bool,
    },
    /// Exponential moment xi(n) of the mean of n iid Bernoulli variables.
    Xi {
        #[arg(long)]
        n: u64,
        /// Also compute xi(n) exactly as a rational (n <= 200).
        #[arg(long)]
        rational: bool,
        /// Also sum the binomial series at this mu in (0, 1).
        #[arg(long)]
        mu: Option<f64>,
    },
    /// CSV table of xi(n) against its envelopes over a log-spaced n grid.
    Envelopes {
        #[arg(long)]
        n_min: u64,
        #[arg(long)]
        n_max: u64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certificate for a posterior on a scenario.
    Certify(CertifyArgs),
    /// Violation-rate experiment from a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses all cores. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Compare the two bound variants at n, delta and KL.
    CompareBounds {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        kl: f64,
    },
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Sample file `{"indices": [...]}`.
    #[arg(long, conflicts_with = "draw", required_unless_present = "draw")]
    sample: Option<PathBuf>,
    /// Draw the sample from the scenario's data distribution.
    #[arg(long, requires = "seed")]
    draw: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "maurer")]
    variant: String,
    /// Minimize the bound over the Gibbs family.
    #[arg(long, conflicts_with = "posterior")]
    optimize: bool,
    /// Posterior file `{"weights": [...]}`; defaults to the prior.
    #[arg(long)]
    posterior: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let Some(out) = e.stdout() {
                print!("{out}");
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
