//! Compensated summation with a fixed-shape, scheduler-independent reduction.

use crate::exec::Execution;

/// Terms per block in [`block_sum`]. The block layout depends only on the
/// number of terms, never on the thread count.
pub const BLOCK: usize = 1 << 14;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum in, keeping both of its components.
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sums `term(lo), ..., term(hi - 1)`.
///
/// Terms are accumulated in index order within consecutive blocks of
/// [`BLOCK`] indices, and block totals are then merged in block order. The
/// result is bit-identical for every [`Execution`] and pool size.
pub fn block_sum<F>(exec: Execution, lo: u64, hi: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    if hi <= lo {
        return 0.0;
    }
    let len = hi - lo;
    let blocks = len.div_ceil(BLOCK as u64) as usize;
    let partials = exec.map_indexed(blocks, |b| {
        let start = lo + b as u64 * BLOCK as u64;
        let end = (start + BLOCK as u64).min(hi);
        (start..end).map(&term).collect::<CompensatedSum>()
    });
    let mut total = CompensatedSum::new();
    for p in partials {
        total.merge(p);
    }
    total.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-24 + f64::EPSILON * 1e-12);
        let naive: f64 = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).sum();
        assert_eq!(naive, 1.0);
    }

    #[test]
    fn cancellation_case() {
        let acc: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn block_sum_is_policy_independent() {
        let f = |k: u64| 1.0 / ((k + 1) as f64).sqrt();
        let hi = 3 * BLOCK as u64 + 17;
        let a = block_sum(Execution::Sequential, 0, hi, f);
        let b = block_sum(Execution::Parallel, 0, hi, f);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(block_sum(Execution::Sequential, 5, 5, f), 0.0);
    }
}
