//! Exponential-moment inequalities for averages of bounded iid variables,
//! and the PAC-Bayes certificates they yield for Gibbs classifiers over
//! finite hypothesis spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`kl`] — binary relative entropy and its inversions.
//! * [`moment`] — the exponential moment `E[exp(n·kl(M(X), μ))]`, its
//!   envelopes, the Riemann-sum constant `c_n` and the Stirling bracket.
//! * [`pacbayes`] — finite scenarios, Gibbs risks, bound variants,
//!   certificates and posterior selection.
//! * [`experiments`] — seeded, scheduler-independent Monte-Carlo and exact
//!   checks of the probabilistic guarantees.
//!
//! With the default `parallel` feature the hot loops run on rayon; without
//! it everything runs sequentially. Both paths use the same fixed-shape
//! reductions, so results are bit-identical either way.

pub mod error;
pub mod exec;
pub mod experiments;
pub mod kl;
pub mod moment;
pub mod pacbayes;
pub mod serde_ext;
pub mod sum;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kl::{kl, kl_inv_lower, kl_inv_upper, Divergence, Probability};
