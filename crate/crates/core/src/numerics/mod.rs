//! Numerical substrate shared by every model family.

mod dist;
mod linalg;
mod rng;
mod special;
mod stats;

pub use dist::{kl_divergence, log_sum_exp, sample_dirichlet, Distribution, SUM_TOLERANCE};
pub use linalg::{log_det_gram, pinv_apply, projection_residual, GramMode, Matrix, RANK_CUTOFF};
pub use rng::Rng;
pub use special::{digamma, log_gamma, multivariate_digamma, trigamma};
pub use stats::{bootstrap_mean_ci, format_sig, quantile_sorted, summarize, Summary, BOOTSTRAP_RESAMPLES};
