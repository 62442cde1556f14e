//! The exponential moment `ξ(n) = E[exp(n·kl(M(X'), μ))]` of the mean of
//! `n` iid Bernoulli variables, its two-sided envelopes, and the pieces
//! used to establish them.
//!
//! For nontrivial Bernoulli variables the moment does not depend on `μ`:
//!
//! ```text
//! ξ(n) = Σ_{k=0}^{n} C(n,k) (k/n)^k ((n-k)/n)^{n-k}        (0^0 = 1)
//! ```
//!
//! and for every `n ≥ 2`
//!
//! ```text
//! e^{-1/6} √(n/2π) c_n + 2  ≤  ξ(n)  ≤  e^{1/(12n)} √(πn/2) + 2
//! ```
//!
//! with `c_n = Σ_{k=1}^{n-1} 1/√(k(n-k))`. For any `[0,1]`-valued law with
//! the same mean the moment is at most `ξ(n)`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kl::{kl_raw, Probability};
use crate::sum::{block_sum, CompensatedSum};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Largest `n` accepted by [`xi_exact_rational`].
pub const RATIONAL_MAX_N: u64 = 200;

/// Largest number of outcomes [`moment_enumerated`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Number of iid draws `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct SampleSize(u64);

impl SampleSize {
    pub fn new(n: u64) -> Result<Self> {
        if n >= 1 {
            Ok(SampleSize(n))
        } else {
            Err(Error::SampleSizeTooSmall { n, min: 1 })
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub(crate) fn require(self, min: u64) -> Result<u64> {
        if self.0 >= min {
            Ok(self.0)
        } else {
            Err(Error::SampleSizeTooSmall { n: self.0, min })
        }
    }
}

impl TryFrom<u64> for SampleSize {
    type Error = Error;

    fn try_from(n: u64) -> Result<Self> {
        SampleSize::new(n)
    }
}

impl From<SampleSize> for u64 {
    fn from(n: SampleSize) -> u64 {
        n.0
    }
}

/// A law on `[0, 1]` with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupportDist {
    atoms: Vec<(f64, Probability)>,
}

impl FiniteSupportDist {
    pub fn new(atoms: Vec<(f64, Probability)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for (i, &(v, _)) in atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidDistribution(format!("atom value {v} outside [0, 1]")));
            }
            if atoms[..i].iter().any(|&(w, _)| w == v) {
                return Err(Error::InvalidDistribution(format!("duplicate atom value {v}")));
            }
        }
        let total: CompensatedSum = atoms.iter().map(|(_, p)| p.value()).collect();
        if (total.value() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}",
                total.value()
            )));
        }
        Ok(FiniteSupportDist { atoms })
    }

    pub fn bernoulli(mu: Probability) -> Self {
        FiniteSupportDist {
            atoms: vec![(0.0, mu.complement()), (1.0, mu)],
        }
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![(value, Probability::ONE)])
    }

    pub fn atoms(&self) -> &[(f64, Probability)] {
        &self.atoms
    }

    pub fn mean(&self) -> Probability {
        let m: CompensatedSum = self.atoms.iter().map(|&(v, p)| v * p.value()).collect();
        Probability::saturating(m.value()).expect("finite mean")
    }

    /// Inverse-CDF lookup: the atom index selected by a uniform `u ∈ [0, 1)`.
    pub(crate) fn index_for(&self, u: f64) -> usize {
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &(_, p)) in self.atoms.iter().enumerate() {
            if p.value() > 0.0 {
                cum += p.value();
                last_positive = i;
                if u < cum {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// Stirling remainder `ln m! - (m ln m - m + ½ ln 2πm)` for `m ≥ 1`.
///
/// Tabulated from exact factorials for `m ≤ 20`, asymptotic series above
/// (truncation error below `1/(1188 m⁹)`, i.e. under 1e-15 at m = 21).
fn stirling_remainder(m: u64) -> f64 {
    debug_assert!(m >= 1);
    if m <= 20 {
        let fact: u64 = (1..=m).product();
        let x = m as f64;
        return (fact as f64).ln() - (x * x.ln() - x + 0.5 * (TAU * x).ln());
    }
    let x = m as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln m!`.
pub fn ln_factorial(m: u64) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let x = m as f64;
    x * x.ln() - x + 0.5 * (TAU * x).ln() + stirling_remainder(m)
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "k = {k} > n = {n}");
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `C(n,k) (k/n)^k ((n-k)/n)^{n-k}`, evaluated in log space.
///
/// The power terms cancel the leading Stirling parts of the binomial
/// coefficient, leaving `½ ln(n / (2π k (n-k)))` plus three small Stirling
/// remainders; every term lies in `(0, 1]`.
fn xi_term(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 1.0;
    }
    let (nf, kf, rf) = (n as f64, k as f64, (n - k) as f64);
    let log_term = 0.5 * (nf / (TAU * kf * rf)).ln() + stirling_remainder(n)
        - stirling_remainder(k)
        - stirling_remainder(n - k);
    log_term.exp()
}

/// `ξ(n)` with the default [`Execution`].
pub fn xi_exact(n: SampleSize) -> f64 {
    xi_exact_with(n, Execution::default())
}

/// `ξ(n)`; bit-identical for every execution policy.
pub fn xi_exact_with(n: SampleSize, exec: Execution) -> f64 {
    let n = n.get();
    block_sum(exec, 0, n + 1, |k| xi_term(n, k))
}

/// `ξ(n)` as an exact rational, `Σ_k C(n,k) k^k (n-k)^{n-k} / n^n`.
pub fn xi_exact_rational(n: SampleSize) -> Result<BigRational> {
    let n = n.get();
    if n > RATIONAL_MAX_N {
        return Err(Error::CostGuard {
            what: "xi_exact_rational",
            size: n as u128,
            limit: RATIONAL_MAX_N as u128,
        });
    }
    let mut binom = BigUint::one();
    let mut numer = BigUint::zero();
    for k in 0..=n {
        if k > 0 {
            binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        }
        // BigUint::pow(0, 0) == 1, which is the 0^0 convention we want
        let kk = BigUint::from(k).pow(k as u32);
        let rr = BigUint::from(n - k).pow((n - k) as u32);
        numer += &binom * kk * rr;
    }
    let denom = BigUint::from(n).pow(n as u32);
    Ok(BigRational::new(numer.into(), denom.into()))
}

/// Converts a (possibly huge) rational to the nearest-ish `f64` by scaling
/// both sides to 64 significant bits before dividing.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_bigint::Sign;
    let (num, den) = (r.numer(), r.denom());
    if num.sign() == Sign::NoSign {
        return 0.0;
    }
    let shift = |x: &num_bigint::BigInt| x.bits().saturating_sub(64);
    let (sn, sd) = (shift(num), shift(den));
    let nf = f64_from_bigint(&(num >> sn));
    let df = f64_from_bigint(&(den >> sd));
    nf / df * 2f64.powi(sn as i32 - sd as i32)
}

fn f64_from_bigint(x: &num_bigint::BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().expect("at most 64 bits")
}

/// `c_n = Σ_{k=1}^{n-1} 1/√(k(n-k))`, which lies in `[1, π]` and tends to `π`.
pub fn c_n(n: SampleSize) -> Result<f64> {
    c_n_with(n, Execution::default())
}

pub fn c_n_with(n: SampleSize, exec: Execution) -> Result<f64> {
    let n = n.require(2)?;
    let nf = n as f64;
    Ok(block_sum(exec, 1, n, |k| {
        let kf = k as f64;
        1.0 / (kf * (nf - kf)).sqrt()
    }))
}

/// Lower and upper envelopes of `ξ(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    pub lower: f64,
    pub upper: f64,
}

pub fn envelopes(n: SampleSize) -> Result<Envelopes> {
    let c = c_n(n)?;
    Ok(envelopes_from_c(n.get(), c))
}

fn envelopes_from_c(n: u64, c: f64) -> Envelopes {
    let nf = n as f64;
    Envelopes {
        lower: (-1.0f64 / 6.0).exp() * (nf / TAU).sqrt() * c + 2.0,
        upper: (1.0 / (12.0 * nf)).exp() * (PI * nf / 2.0).sqrt() + 2.0,
    }
}

/// Bracket `(lo, hi)` on `ln n!` from Stirling's formula:
/// `lo = ln √(2πn) + n ln(n/e)` and `hi = lo + 1/(12n)`.
pub fn stirling_bounds(n: SampleSize) -> (f64, f64) {
    let nf = n.get() as f64;
    let lo = 0.5 * (TAU * nf).ln() + nf * (nf.ln() - 1.0);
    (lo, lo + 1.0 / (12.0 * nf))
}

/// `Σ_k C(n,k) (1-μ)^{n-k} μ^k exp(n·kl(k/n, μ))`, summed term by term at a
/// fixed `μ ∈ (0, 1)` without cancelling the `μ` dependence analytically.
pub fn moment_bernoulli_at_mu(n: SampleSize, mu: Probability) -> Result<f64> {
    let m = mu.value();
    if m <= 0.0 || m >= 1.0 {
        return Err(Error::OpenInterval("mu", m));
    }
    let n = n.get();
    let nf = n as f64;
    let (ln_mu, ln_1m) = (m.ln(), (-m).ln_1p());
    Ok(block_sum(Execution::default(), 0, n + 1, |k| {
        let kf = k as f64;
        let mean = kf / nf;
        let log_w = ln_binomial(n, k) + (nf - kf) * ln_1m + kf * ln_mu;
        (log_w + nf * kl_raw(mean, m)).exp()
    }))
}

/// `E[exp(n·kl(M(X), μ))]` for `X_1..X_n` iid from `dist`, `μ` its mean, by
/// visiting all `|atoms|^n` outcomes in lexicographic atom-index order.
pub fn moment_enumerated(dist: &FiniteSupportDist, n: SampleSize) -> Result<f64> {
    let n = n.get();
    let k = dist.atoms.len() as u128;
    let total = u32::try_from(n)
        .ok()
        .and_then(|e| k.checked_pow(e))
        .filter(|&t| t <= ENUMERATION_LIMIT)
        .ok_or(Error::CostGuard {
            what: "moment_enumerated",
            size: k.saturating_pow(n.min(u32::MAX as u64) as u32),
            limit: ENUMERATION_LIMIT,
        })?;
    let mu = dist.mean().value();
    let nf = n as f64;
    let base = k as u64;
    let atoms = &dist.atoms;
    Ok(block_sum(Execution::default(), 0, total as u64, |idx| {
        // digits of idx in base |atoms|, most significant first
        let mut digits = idx;
        let mut div = base.pow(n as u32 - 1);
        let (mut prob, mut sum) = (1.0, 0.0);
        for _ in 0..n {
            let (v, p) = atoms[(digits / div) as usize];
            digits %= div;
            div = (div / base).max(1);
            prob *= p.value();
            sum += v;
        }
        if prob == 0.0 {
            return 0.0;
        }
        let mean = (sum / nf).min(1.0);
        prob * (nf * kl_raw(mean, mu)).exp()
    }))
}

/// `ξ(n)` together with the quantities that bracket it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: SampleSize,
    pub xi: f64,
    pub lower_env: f64,
    pub upper_env: f64,
    pub sqrt_n: f64,
    pub two_sqrt_n: f64,
    pub c_n: f64,
}

impl MomentReport {
    /// Requires `n ≥ 2`.
    pub fn compute(n: SampleSize) -> Result<Self> {
        Self::compute_with(n, Execution::default())
    }

    pub fn compute_with(n: SampleSize, exec: Execution) -> Result<Self> {
        let c = c_n_with(n, exec)?;
        let env = envelopes_from_c(n.get(), c);
        let sqrt_n = (n.get() as f64).sqrt();
        Ok(MomentReport {
            n,
            xi: xi_exact_with(n, exec),
            lower_env: env.lower,
            upper_env: env.upper,
            sqrt_n,
            two_sqrt_n: 2.0 * sqrt_n,
            c_n: c,
        })
    }

    pub fn within_envelopes(&self) -> bool {
        self.lower_env <= self.xi && self.xi <= self.upper_env
    }

    /// `ξ(n) ≥ √n`, claimed for `n ≥ 2`.
    pub fn simple_lower_holds(&self) -> bool {
        self.xi >= self.sqrt_n
    }

    /// `ξ(n) ≤ 2√n`, claimed for `n ≥ 8`; vacuously true below.
    pub fn simple_upper_holds(&self) -> bool {
        self.n.get() < 8 || self.xi <= self.two_sqrt_n
    }

    /// Every claimed inequality that applies at this `n`.
    pub fn all_hold(&self) -> bool {
        self.within_envelopes() && self.simple_lower_holds() && self.simple_upper_holds()
    }
}

/// `points` log-spaced integers in `[min, max]`, rounded, deduplicated and
/// ascending.
pub fn log_grid(min: u64, max: u64, points: usize) -> Vec<u64> {
    assert!(min >= 1 && min <= max && points >= 1);
    if points == 1 {
        return vec![min];
    }
    let (a, b) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            ((a + t * (b - a)).exp().round() as u64).clamp(min, max)
        })
        .collect();
    out.dedup();
    out
}
