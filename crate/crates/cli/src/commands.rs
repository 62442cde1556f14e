use crate::{CertifyArgs, Command};
use klbound::experiments::{draw_sample, violation_experiment, ExperimentConfig, TrialRng};
use klbound::kl::{kl, kl_inv_lower, kl_inv_upper, Divergence, Probability};
use klbound::moment::{
    log_grid, moment_bernoulli_at_mu, xi_exact, xi_exact_rational, MomentReport, SampleSize,
};
use klbound::pacbayes::{
    bound_rhs, certify, optimize_posterior, Certificate, Posterior, Sample, Scenario, Variant,
};
use klbound::serde_ext::to_canonical_string;
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid input files.
    Usage(String),
    /// The command completed but a hard invariant did not hold; the
    /// payload is still printed.
    Gate { message: String, stdout: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Gate { .. } => 2,
        }
    }

    pub fn stdout(&self) -> Option<&str> {
        match self {
            CliError::Gate { stdout, .. } if !stdout.is_empty() => Some(stdout),
            _ => None,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Gate { message, .. } => f.write_str(message),
        }
    }
}

impl From<klbound::Error> for CliError {
    fn from(e: klbound::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult = Result<String, CliError>;

fn json<T: Serialize>(value: &T) -> String {
    to_canonical_string(value).expect("output serializes") + "\n"
}

/// 17 significant digits, scientific notation.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Kl { p, q } => cmd_kl(p, q),
        Command::Klinv { qhat, budget, lower } => cmd_klinv(qhat, budget, lower),
        Command::Xi { n, rational, mu } => cmd_xi(n, rational, mu),
        Command::Envelopes {
            n_min,
            n_max,
            points,
            out,
        } => cmd_envelopes(n_min, n_max, points, out.as_deref()),
        Command::Certify(args) => cmd_certify(args),
        Command::Experiment {
            config,
            out,
            threads,
        } => cmd_experiment(&config, out.as_deref(), threads),
        Command::CompareBounds { n, delta, kl } => cmd_compare_bounds(n, delta, kl),
    }
}

#[derive(Serialize)]
struct Scalar {
    #[serde(with = "klbound::serde_ext")]
    value: f64,
}

fn cmd_kl(p: f64, q: f64) -> CliResult {
    let value = kl(Probability::new(p)?, Probability::new(q)?).value();
    Ok(json(&Scalar { value }))
}

fn cmd_klinv(qhat: f64, budget: f64, lower: bool) -> CliResult {
    let q = Probability::new(qhat)?;
    let b = Divergence::new(budget)?;
    let value = if lower { kl_inv_lower(q, b) } else { kl_inv_upper(q, b) }.value();
    Ok(json(&Scalar { value }))
}

#[derive(Serialize)]
struct XiOutput {
    n: u64,
    xi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rational: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_at_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difference: Option<f64>,
}

fn cmd_xi(n: u64, rational: bool, mu: Option<f64>) -> CliResult {
    let size = SampleSize::new(n)?;
    let xi = xi_exact(size);
    let rational = if rational {
        Some(xi_exact_rational(size)?.to_string())
    } else {
        None
    };
    let at_mu = match mu {
        Some(m) => Some(moment_bernoulli_at_mu(size, Probability::new(m)?)?),
        None => None,
    };
    Ok(json(&XiOutput {
        n,
        xi,
        rational,
        mu,
        xi_at_mu: at_mu,
        difference: at_mu.map(|v| v - xi),
    }))
}

pub const ENVELOPE_HEADER: &str = "n,xi,lower_env,upper_env,sqrt_n,two_sqrt_n,c_n";

fn cmd_envelopes(n_min: u64, n_max: u64, points: usize, out: Option<&Path>) -> CliResult {
    if n_min < 2 || n_min > n_max || points == 0 {
        return Err(CliError::Usage(format!(
            "need 2 <= n-min <= n-max and points >= 1 (got n-min={n_min}, n-max={n_max}, points={points})"
        )));
    }
    let mut csv = String::from(ENVELOPE_HEADER);
    csv.push('\n');
    let mut failed = Vec::new();
    for n in log_grid(n_min, n_max, points) {
        let r = MomentReport::compute(SampleSize::new(n)?)?;
        if !r.all_hold() {
            failed.push(n);
        }
        let cols = [r.xi, r.lower_env, r.upper_env, r.sqrt_n, r.two_sqrt_n, r.c_n].map(sig17);
        csv.push_str(&format!("{n},{}\n", cols.join(",")));
    }
    let stdout = match out {
        Some(path) => {
            write(path, &csv)?;
            String::new()
        }
        None => csv,
    };
    if failed.is_empty() {
        Ok(stdout)
    } else {
        Err(CliError::Gate {
            message: format!("moment inequalities violated at n in {failed:?}"),
            stdout,
        })
    }
}

#[derive(Serialize)]
struct CertifyOutput {
    #[serde(flatten)]
    certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior_weights: Option<Vec<f64>>,
}

fn cmd_certify(args: CertifyArgs) -> CliResult {
    let variant: Variant = args.variant.parse()?;
    let scenario = Scenario::from_json(&read(&args.scenario)?)?;
    let sample = match (&args.sample, args.seed) {
        (Some(path), _) => {
            let s: Sample = serde_json::from_str(&read(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            s.validate(&scenario)?;
            s
        }
        (None, Some(seed)) => draw_sample(&scenario, &mut TrialRng::new(seed, 0)),
        (None, None) => return Err(CliError::Usage("need --sample or --draw --seed".into())),
    };
    variant.check(scenario.n().get())?;
    let output = if args.optimize {
        let opt = optimize_posterior(&scenario, &sample, variant)?;
        CertifyOutput {
            certificate: opt.certificate,
            lambda: Some(opt.lambda),
            posterior_weights: Some(opt.posterior.weights().to_vec()),
        }
    } else {
        let q = match &args.posterior {
            Some(path) => serde_json::from_str::<Posterior>(&read(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            None => Posterior::prior_of(&scenario),
        };
        CertifyOutput {
            certificate: certify(&q, &scenario, &sample, variant)?,
            lambda: None,
            posterior_weights: None,
        }
    };
    Ok(json(&output))
}

fn cmd_experiment(config: &Path, out: Option<&Path>, threads: usize) -> CliResult {
    let cfg = ExperimentConfig::from_json(&read(config)?)?;
    let report = klbound::exec::with_threads(threads, || violation_experiment(&cfg))?;
    let text = report.to_json();
    let stdout = match out {
        Some(path) => {
            write(path, &text)?;
            String::new()
        }
        None => text,
    };
    if report.within_band {
        Ok(stdout)
    } else {
        Err(CliError::Gate {
            message: format!(
                "violation rate {} exceeds delta + 3 sigma = {}",
                report.rate, report.band
            ),
            stdout,
        })
    }
}

#[derive(Serialize)]
struct Comparison {
    n: u64,
    delta: f64,
    kl: f64,
    rhs_maurer: f64,
    rhs_mcallester: f64,
    rhs_maurer_delta_over_sqrt_n: f64,
    maurer_at_reduced_delta_is_smaller: bool,
}

fn cmd_compare_bounds(n: u64, delta: f64, kl: f64) -> CliResult {
    Variant::Maurer.check(n)?;
    let d = Divergence::new(kl)?;
    let reduced = delta / (n as f64).sqrt();
    let rhs_maurer = bound_rhs(d, n, delta, Variant::Maurer)?;
    let rhs_mcallester = bound_rhs(d, n, delta, Variant::McAllester)?;
    let tight = bound_rhs(d, n, reduced, Variant::Maurer)?;
    Ok(json(&Comparison {
        n,
        delta,
        kl,
        rhs_maurer,
        rhs_mcallester,
        rhs_maurer_delta_over_sqrt_n: tight,
        maurer_at_reduced_delta_is_smaller: tight < rhs_mcallester,
    }))
}
