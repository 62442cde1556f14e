//! PAC-Bayes certificates for Gibbs classifiers over a finite hypothesis
//! space `H` and a finite data space `Z`.
//!
//! A [`Scenario`] fixes the data law `D` on `Z`, a loss table `h(z) ∈ [0,1]`,
//! a prior `P` on `H`, the sample size `n` and the confidence `δ`. Given a
//! sample `S` and a posterior `Q`, [`certify`] bounds the Gibbs risk `Q(D)`
//! by inverting the binary KL:
//!
//! ```text
//! Q(D) ≤ sup{ ε : kl(Q(S), ε) ≤ rhs }
//! maurer:     rhs = (KL(Q,P) + ln(1/δ) + ln(2√n)) / n        (n ≥ 8)
//! mcallester: rhs = (KL(Q,P) + ln(1/δ) + ln(2n)) / (n - 1)   (n ≥ 2)
//! ```

use crate::error::{Error, Result};
use crate::kl::{kl_inv_upper, kl_raw, Divergence, Probability};
use crate::moment::SampleSize;
use crate::sum::CompensatedSum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Tolerance on the total mass of probability vectors.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Upper end of the λ search range in [`optimize_posterior`].
pub const LAMBDA_MAX: f64 = 1e4;

/// Points in the coarse λ grid of [`optimize_posterior`].
pub const LAMBDA_GRID_POINTS: usize = 64;

/// Width (in `ln(1+λ)`) at which golden-section refinement stops.
pub const LAMBDA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `(KL + ln(1/δ) + ln(2√n)) / n`, valid for `n ≥ 8`.
    Maurer,
    /// `(KL + ln(1/δ) + ln(2n)) / (n - 1)`, valid for `n ≥ 2`.
    McAllester,
}

impl Variant {
    pub fn min_n(self) -> u64 {
        match self {
            Variant::Maurer => 8,
            Variant::McAllester => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Maurer => "maurer",
            Variant::McAllester => "mcallester",
        }
    }

    pub fn check(self, n: u64) -> Result<()> {
        if n >= self.min_n() {
            Ok(())
        } else {
            Err(Error::VariantGate {
                variant: self.name(),
                n,
                min: self.min_n(),
            })
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maurer" => Ok(Variant::Maurer),
            "mcallester" => Ok(Variant::McAllester),
            other => Err(Error::Precondition(format!("unknown variant {other:?}"))),
        }
    }
}

/// Wire form of a [`Scenario`]; field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub z_size: usize,
    pub data_dist: Vec<f64>,
    pub loss_table: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub n: u64,
    pub delta: f64,
}

/// A validated, immutable learning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    z_size: usize,
    data_dist: Vec<f64>,
    loss_table: Vec<Vec<f64>>,
    prior: Vec<f64>,
    n: SampleSize,
    delta: f64,
    true_risks: Vec<f64>,
}

fn check_mass(what: &str, v: &[f64]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidScenario(format!("{what} has invalid entry {bad}")));
    }
    let total: CompensatedSum = v.iter().copied().collect();
    if (total.value() - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidScenario(format!(
            "{what} sums to {}, not 1",
            total.value()
        )));
    }
    Ok(())
}

fn renormalize(v: &mut [f64]) {
    let total: CompensatedSum = v.iter().copied().collect();
    let t = total.value();
    v.iter_mut().for_each(|x| *x /= t);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).collect::<CompensatedSum>().value()
}

impl Scenario {
    pub fn new(file: ScenarioFile) -> Result<Self> {
        let ScenarioFile {
            z_size,
            mut data_dist,
            loss_table,
            mut prior,
            n,
            delta,
        } = file;
        if z_size == 0 {
            return Err(Error::InvalidScenario("z_size must be at least 1".into()));
        }
        if data_dist.len() != z_size {
            return Err(Error::InvalidScenario(format!(
                "data_dist has {} entries, z_size is {z_size}",
                data_dist.len()
            )));
        }
        if loss_table.is_empty() {
            return Err(Error::InvalidScenario("loss_table has no hypotheses".into()));
        }
        if prior.len() != loss_table.len() {
            return Err(Error::InvalidScenario(format!(
                "prior has {} entries, loss_table has {} rows",
                prior.len(),
                loss_table.len()
            )));
        }
        for (h, row) in loss_table.iter().enumerate() {
            if row.len() != z_size {
                return Err(Error::InvalidScenario(format!(
                    "loss_table row {h} has {} entries, z_size is {z_size}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidScenario(format!(
                    "loss_table row {h} has entry {bad} outside [0, 1]"
                )));
            }
        }
        check_mass("data_dist", &data_dist)?;
        check_mass("prior", &prior)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidScenario(format!("delta must lie in (0, 1), got {delta}")));
        }
        let n = SampleSize::new(n).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        renormalize(&mut data_dist);
        renormalize(&mut prior);
        let true_risks = loss_table.iter().map(|row| dot(row, &data_dist).min(1.0)).collect();
        Ok(Scenario {
            z_size,
            data_dist,
            loss_table,
            prior,
            n,
            delta,
            true_risks,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(s).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        Scenario::new(file)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            z_size: self.z_size,
            data_dist: self.data_dist.clone(),
            loss_table: self.loss_table.clone(),
            prior: self.prior.clone(),
            n: self.n.get(),
            delta: self.delta,
        }
    }

    /// Hex SHA-256 of the canonical (compact, field-ordered, renormalized)
    /// JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn num_hypotheses(&self) -> usize {
        self.loss_table.len()
    }

    pub fn data_dist(&self) -> &[f64] {
        &self.data_dist
    }

    pub fn loss_table(&self) -> &[Vec<f64>] {
        &self.loss_table
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn n(&self) -> SampleSize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Copy of the scenario with a different sample size.
    pub fn with_n(&self, n: SampleSize) -> Scenario {
        Scenario { n, ..self.clone() }
    }

    /// `h(D)` for every hypothesis.
    pub fn true_risks(&self) -> &[f64] {
        &self.true_risks
    }

    /// Every loss is 0 or 1 and every `h(D)` lies strictly in `(0, 1)`.
    pub fn induces_nontrivial_bernoulli(&self) -> bool {
        self.loss_table
            .iter()
            .flatten()
            .all(|&x| x == 0.0 || x == 1.0)
            && self.true_risks.iter().all(|&r| r > 0.0 && r < 1.0)
    }

    fn check_hypothesis(&self, h: usize) -> Result<()> {
        if h < self.num_hypotheses() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: h,
                len: self.num_hypotheses(),
            })
        }
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(file: ScenarioFile) -> Result<Self> {
        Scenario::new(file)
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> ScenarioFile {
        s.to_file()
    }
}

/// Indices `(Z_1, ..., Z_n)` into the data space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub indices: Vec<usize>,
}

impl Sample {
    pub fn new(indices: Vec<usize>, scenario: &Scenario) -> Result<Self> {
        let s = Sample { indices };
        s.validate(scenario)?;
        Ok(s)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.indices.len() as u64 != scenario.n().get() {
            return Err(Error::ShapeMismatch {
                expected: scenario.n().get() as usize,
                got: self.indices.len(),
            });
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= scenario.z_size()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: scenario.z_size(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Probability vector `Q` over hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorFile", into = "PosteriorFile")]
pub struct Posterior {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PosteriorFile {
    weights: Vec<f64>,
}

impl TryFrom<PosteriorFile> for Posterior {
    type Error = Error;

    fn try_from(f: PosteriorFile) -> Result<Self> {
        Posterior::new(f.weights)
    }
}

impl From<Posterior> for PosteriorFile {
    fn from(p: Posterior) -> PosteriorFile {
        PosteriorFile { weights: p.weights }
    }
}

impl Posterior {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("posterior has no weights".into()));
        }
        check_mass("posterior", &weights).map_err(|e| match e {
            Error::InvalidScenario(m) => Error::InvalidDistribution(m),
            e => e,
        })?;
        Ok(Posterior { weights })
    }

    /// The prior of `scenario`, used as a posterior.
    pub fn prior_of(scenario: &Scenario) -> Self {
        Posterior {
            weights: scenario.prior.clone(),
        }
    }

    pub fn point_mass(len: usize, h: usize) -> Result<Self> {
        if h >= len {
            return Err(Error::IndexOutOfRange { index: h, len });
        }
        let mut weights = vec![0.0; len];
        weights[h] = 1.0;
        Ok(Posterior { weights })
    }

    /// Normalizes `ln P(h) + score(h)` with a max shift; hypotheses with
    /// `P(h) = 0` get weight zero.
    fn exponential_tilt(prior: &[f64], score: impl Fn(usize) -> f64) -> Posterior {
        let logs: Vec<f64> = prior
            .iter()
            .enumerate()
            .map(|(h, &p)| if p > 0.0 { p.ln() + score(h) } else { f64::NEG_INFINITY })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        renormalize(&mut weights);
        Posterior { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.len() == scenario.num_hypotheses() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: scenario.num_hypotheses(),
                got: self.len(),
            })
        }
    }
}

/// `h(D) = E_{z~D}[h(z)]`.
pub fn true_risk(h: usize, scenario: &Scenario) -> Result<Probability> {
    scenario.check_hypothesis(h)?;
    Probability::saturating(scenario.true_risks[h])
}

fn empirical_risk_unchecked(row: &[f64], sample: &Sample) -> f64 {
    let total: CompensatedSum = sample.indices.iter().map(|&i| row[i]).collect();
    (total.value() / sample.len() as f64).min(1.0)
}

/// `M(h(S))`, the mean loss of `h` over the sample.
pub fn empirical_risk(h: usize, scenario: &Scenario, sample: &Sample) -> Result<Probability> {
    scenario.check_hypothesis(h)?;
    sample.validate(scenario)?;
    Probability::saturating(empirical_risk_unchecked(&scenario.loss_table[h], sample))
}

/// `M(h(S))` for every hypothesis.
pub fn empirical_risks(scenario: &Scenario, sample: &Sample) -> Result<Vec<f64>> {
    sample.validate(scenario)?;
    Ok(scenario
        .loss_table
        .iter()
        .map(|row| empirical_risk_unchecked(row, sample))
        .collect())
}

/// `Q(S) = E_{h~Q}[M(h(S))]`.
pub fn gibbs_empirical_risk(
    posterior: &Posterior,
    scenario: &Scenario,
    sample: &Sample,
) -> Result<Probability> {
    posterior.check_shape(scenario)?;
    let risks = empirical_risks(scenario, sample)?;
    Probability::saturating(dot(&posterior.weights, &risks))
}

/// `Q(D) = E_{h~Q}[h(D)]`.
pub fn gibbs_true_risk(posterior: &Posterior, scenario: &Scenario) -> Result<Probability> {
    posterior.check_shape(scenario)?;
    Probability::saturating(dot(&posterior.weights, &scenario.true_risks))
}

/// `KL(Q, P) = Σ_h Q(h) ln(Q(h)/P(h))`; infinite when `Q` puts mass where
/// `P` does not.
pub fn kl_qp(posterior: &Posterior, prior: &[f64]) -> Result<Divergence> {
    if posterior.len() != prior.len() {
        return Err(Error::ShapeMismatch {
            expected: prior.len(),
            got: posterior.len(),
        });
    }
    let mut acc = CompensatedSum::new();
    for (&q, &p) in posterior.weights.iter().zip(prior) {
        if q == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Ok(Divergence::INFINITY);
        }
        acc.add(q * (q / p).ln());
    }
    Divergence::new(acc.value().max(0.0))
}

/// Right-hand side of the KL-form bound.
pub fn bound_rhs(kl_qp: Divergence, n: u64, delta: f64, variant: Variant) -> Result<f64> {
    variant.check(n)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OpenInterval("delta", delta));
    }
    let nf = n as f64;
    let conf = (1.0 / delta).ln();
    Ok(match variant {
        Variant::Maurer => (kl_qp.value() + conf + (2.0 * nf.sqrt()).ln()) / nf,
        Variant::McAllester => (kl_qp.value() + conf + (2.0 * nf).ln()) / (nf - 1.0),
    })
}

/// A certified upper bound on the Gibbs risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub variant: Variant,
    pub empirical_gibbs_risk: Probability,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_gibbs_risk: Option<Probability>,
    pub kl_qp: Divergence,
    pub n: u64,
    pub delta: f64,
    #[serde(with = "crate::serde_ext")]
    pub rhs: f64,
    pub risk_upper: Probability,
    pub scenario_digest: String,
}

fn assemble(
    variant: Variant,
    scenario: &Scenario,
    digest: &str,
    posterior: &Posterior,
    emp_risks: &[f64],
) -> Result<Certificate> {
    let emp = Probability::saturating(dot(&posterior.weights, emp_risks))?;
    let kl = kl_qp(posterior, &scenario.prior)?;
    let rhs = bound_rhs(kl, scenario.n.get(), scenario.delta, variant)?;
    Ok(Certificate {
        variant,
        empirical_gibbs_risk: emp,
        true_gibbs_risk: Some(Probability::saturating(dot(
            &posterior.weights,
            &scenario.true_risks,
        ))?),
        kl_qp: kl,
        n: scenario.n.get(),
        delta: scenario.delta,
        rhs,
        risk_upper: kl_inv_upper(emp, Divergence::new(rhs)?),
        scenario_digest: digest.to_owned(),
    })
}

/// Builds the certificate `Q(D) ≤ kl_inv_upper(Q(S), rhs)`.
pub fn certify(
    posterior: &Posterior,
    scenario: &Scenario,
    sample: &Sample,
    variant: Variant,
) -> Result<Certificate> {
    variant.check(scenario.n.get())?;
    posterior.check_shape(scenario)?;
    let risks = empirical_risks(scenario, sample)?;
    assemble(variant, scenario, &scenario.digest(), posterior, &risks)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("lambda must be >= 0, got {lambda}")))
    }
}

fn gibbs_from_risks(prior: &[f64], emp_risks: &[f64], n: u64, lambda: f64) -> Posterior {
    let scale = lambda * n as f64;
    Posterior::exponential_tilt(prior, |h| -scale * emp_risks[h])
}

/// `Q_λ(h) ∝ P(h) exp(-λ n M(h(S)))`.
pub fn gibbs_family(
    prior: &[f64],
    scenario: &Scenario,
    sample: &Sample,
    lambda: f64,
) -> Result<Posterior> {
    check_lambda(lambda)?;
    if prior.len() != scenario.num_hypotheses() {
        return Err(Error::ShapeMismatch {
            expected: scenario.num_hypotheses(),
            got: prior.len(),
        });
    }
    let risks = empirical_risks(scenario, sample)?;
    Ok(gibbs_from_risks(prior, &risks, scenario.n.get(), lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedPosterior {
    pub lambda: f64,
    pub posterior: Posterior,
    pub certificate: Certificate,
}

/// Minimizes `risk_upper` over the Gibbs family `Q_λ`, `λ ∈ [0, 10^4]`.
///
/// The search runs on `t = ln(1+λ)`: a 64-point uniform grid (ties go to
/// the smaller `λ`), then golden-section refinement on the bracket around
/// the best grid point down to width `1e-6`. Deterministic.
pub fn optimize_posterior(
    scenario: &Scenario,
    sample: &Sample,
    variant: Variant,
) -> Result<OptimizedPosterior> {
    variant.check(scenario.n.get())?;
    let risks = empirical_risks(scenario, sample)?;
    let digest = scenario.digest();
    let n = scenario.n.get();
    let eval = |t: f64| -> Result<(f64, Posterior, Certificate)> {
        let lambda = t.exp_m1();
        let q = gibbs_from_risks(&scenario.prior, &risks, n, lambda);
        let cert = assemble(variant, scenario, &digest, &q, &risks)?;
        Ok((lambda, q, cert))
    };
    let objective = |t: f64| -> Result<f64> { Ok(eval(t)?.2.risk_upper.value()) };

    let t_max = LAMBDA_MAX.ln_1p();
    let step = t_max / (LAMBDA_GRID_POINTS - 1) as f64;
    let grid_t = |i: usize| if i + 1 == LAMBDA_GRID_POINTS { t_max } else { i as f64 * step };
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..LAMBDA_GRID_POINTS {
        let v = objective(grid_t(i))?;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }

    let mut a = grid_t(best_i.saturating_sub(1));
    let mut b = grid_t((best_i + 1).min(LAMBDA_GRID_POINTS - 1));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    while b - a > LAMBDA_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d)?;
        }
    }
    let t_golden = 0.5 * (a + b);
    let t_grid = grid_t(best_i);
    let v_golden = objective(t_golden)?;
    let t_star = if v_golden < best_v || (v_golden == best_v && t_golden < t_grid) {
        t_golden
    } else {
        t_grid
    };
    let (lambda, posterior, certificate) = eval(t_star)?;
    Ok(OptimizedPosterior {
        lambda,
        posterior,
        certificate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPosterior {
    pub posterior: Posterior,
    /// False when some hypothesis does not induce a nontrivial Bernoulli
    /// variable, in which case the construction loses its tightness.
    pub nontrivial_bernoulli: bool,
}

/// `Q_S(h) ∝ P(h) exp(n·kl(M(h(S)), h(D)))`.
pub fn adversarial_posterior(scenario: &Scenario, sample: &Sample) -> Result<AdversarialPosterior> {
    let exponents = kl_exponents(scenario, sample)?;
    let posterior = Posterior::exponential_tilt(&scenario.prior, |h| exponents[h]);
    Ok(AdversarialPosterior {
        posterior,
        nontrivial_bernoulli: scenario.induces_nontrivial_bernoulli(),
    })
}

/// `n·kl(M(h(S)), h(D))` for every hypothesis.
pub fn kl_exponents(scenario: &Scenario, sample: &Sample) -> Result<Vec<f64>> {
    let risks = empirical_risks(scenario, sample)?;
    let nf = scenario.n.get() as f64;
    Ok(risks
        .iter()
        .zip(&scenario.true_risks)
        .map(|(&m, &r)| nf * kl_raw(m, r))
        .collect())
}

/// `ψ(h, S) = n·kl(M(h(S)), h(D)) - ln (dQ/dP)(h)` on the support of `P`
/// (`None` where `P(h) = 0`).
pub fn psi_values(
    posterior: &Posterior,
    scenario: &Scenario,
    sample: &Sample,
) -> Result<Vec<Option<f64>>> {
    posterior.check_shape(scenario)?;
    let exps = kl_exponents(scenario, sample)?;
    Ok(scenario
        .prior
        .iter()
        .zip(&posterior.weights)
        .zip(&exps)
        .map(|((&p, &q), &e)| (p > 0.0).then(|| e - (q / p).ln()))
        .collect())
}

/// Both sides of the change-of-measure step at a fixed sample:
/// `(E_{h~Q}[n·kl(M(h(S)),h(D)) - ln dQ/dP(h)], ln E_{h~P}[exp(n·kl(M(h(S)),h(D)))])`.
/// The first never exceeds the second, with equality for the adversarial
/// posterior.
pub fn change_of_measure_sides(
    posterior: &Posterior,
    scenario: &Scenario,
    sample: &Sample,
) -> Result<(f64, f64)> {
    posterior.check_shape(scenario)?;
    let exps = kl_exponents(scenario, sample)?;
    let prior = &scenario.prior;

    let mut lhs = CompensatedSum::new();
    for ((&q, &p), &e) in posterior.weights.iter().zip(prior).zip(&exps) {
        if q == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Ok((f64::NEG_INFINITY, log_mean_exp(prior, &exps)));
        }
        lhs.add(q * (e - (q / p).ln()));
    }
    Ok((lhs.value(), log_mean_exp(prior, &exps)))
}

/// `ln Σ_h w(h) exp(x(h))` over `w(h) > 0`, max-shifted.
fn log_mean_exp(w: &[f64], x: &[f64]) -> f64 {
    let max = w
        .iter()
        .zip(x)
        .filter(|(&wi, _)| wi > 0.0)
        .map(|(_, &xi)| xi)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: CompensatedSum = w
        .iter()
        .zip(x)
        .filter(|(&wi, _)| wi > 0.0)
        .map(|(&wi, &xi)| wi * (xi - max).exp())
        .collect();
    max + s.value().ln()
}
