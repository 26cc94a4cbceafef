//! Exact Bayesian posteriors over hierarchically nested task families, the
//! matching Bayes-optimal predictors, and an attention-only construction that
//! reads out empirical bigram conditionals.
//!
//! Modules:
//! - [`numerics`]: special functions, seeded streams, dense linear algebra.
//! - [`markov`]: fixed-order Markov chains, n-gram statistics, order posteriors.
//! - [`regression`]: mixed-dimension noiseless regression and Wishart log-determinants.
//! - [`pcfg`]: the four-production grammar family with a derivation depth cap.
//! - [`attention`]: two-layer masked attention and the bigram-extractor weights.
//! - [`boolean`]: copy-bit vs majority-of-three prompts and hypothesis enumeration.

pub mod attention;
pub mod boolean;
pub mod error;
pub mod markov;
pub mod numerics;
pub mod pcfg;
pub mod regression;

pub use error::{Error, Result};
pub use numerics::{Distribution, Matrix, Rng};
