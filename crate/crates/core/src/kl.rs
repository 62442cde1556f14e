//! Binary relative entropy between Bernoulli laws and its inversions.
//!
//! Convention: `0·ln(0/x) = 0` for every `x`, including `x = 0`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Hard cap on bisection steps for the inversions.
pub const BISECTION_MAX_ITER: usize = 200;

/// A real number in `[0, 1]`. NaN and out-of-range values are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    /// Clamps a value known to be a probability up to rounding, e.g. a
    /// weighted mean of values in `[0, 1]`. NaN is still rejected.
    pub fn saturating(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::InvalidProbability(value));
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A non-negative extended real: finite, or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "ExtReal", into = "ExtReal")]
pub struct Divergence(f64);

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct ExtReal(#[serde(with = "crate::serde_ext")] f64);

impl Divergence {
    pub const ZERO: Divergence = Divergence(0.0);
    pub const INFINITY: Divergence = Divergence(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 {
            Ok(Divergence(value))
        } else {
            Err(Error::InvalidDivergence(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl TryFrom<ExtReal> for Divergence {
    type Error = Error;

    fn try_from(v: ExtReal) -> Result<Self> {
        Divergence::new(v.0)
    }
}

impl From<Divergence> for ExtReal {
    fn from(d: Divergence) -> ExtReal {
        ExtReal(d.0)
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `x·ln(x/y)` with `0·ln(0/y) = 0` and `x·ln(x/0) = +inf` for `x > 0`.
#[inline]
fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// Raw `kl(p, q)` on values already known to lie in `[0, 1]`.
#[inline]
pub(crate) fn kl_raw(p: f64, q: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    // complements are formed once and used directly so that the second
    // term keeps its precision when p and q are both close to 1
    let (pc, qc) = (1.0 - p, 1.0 - q);
    let d = xlogx_over_y(p, q) + xlogx_over_y(pc, qc);
    d.max(0.0)
}

/// Relative entropy of Bernoulli(`p`) with respect to Bernoulli(`q`).
///
/// Infinite iff `q = 0 < p` or `p < 1 = q`; exactly zero when `p == q`.
pub fn kl(p: Probability, q: Probability) -> Divergence {
    Divergence(kl_raw(p.0, q.0))
}

/// `sup{ε ∈ [q̂, 1] : kl(q̂, ε) ≤ budget}`.
///
/// Bisects on `[q̂, 1)` until the bracket cannot shrink in `f64` (or
/// [`BISECTION_MAX_ITER`] steps) and returns the lower end, so the result
/// never overstates the largest admissible mean.
pub fn kl_inv_upper(q_hat: Probability, budget: Divergence) -> Probability {
    let (q, b) = (q_hat.0, budget.0);
    if b == 0.0 {
        return q_hat;
    }
    if b.is_infinite() || q == 1.0 {
        return Probability::ONE;
    }
    if q == 0.0 {
        // closed form 1 - e^{-budget}, nudged down if rounding overshot
        let mut e = -(-b).exp_m1();
        while e > 0.0 && kl_raw(0.0, e) > b {
            e = e.next_down();
        }
        return Probability(e);
    }
    let (mut lo, mut hi) = (q, 1.0_f64);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if kl_raw(q, mid) <= b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Probability(lo)
}

/// `inf{ε ∈ [0, q̂] : kl(q̂, ε) ≤ budget}`; mirror image of [`kl_inv_upper`],
/// returning the upper end of the final bracket.
pub fn kl_inv_lower(q_hat: Probability, budget: Divergence) -> Probability {
    let (q, b) = (q_hat.0, budget.0);
    if b == 0.0 || q == 0.0 {
        return q_hat;
    }
    if b.is_infinite() {
        return Probability::ZERO;
    }
    if q == 1.0 {
        let mut e = (-b).exp();
        while e < 1.0 && kl_raw(1.0, e) > b {
            e = e.next_up();
        }
        return Probability(e);
    }
    let (mut lo, mut hi) = (0.0_f64, q);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if kl_raw(q, mid) <= b {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Probability(hi)
}
