mod attention;
mod boolean;
mod markov;
mod pcfg;
mod probe;
mod regression;
mod wishart;

use occam_core::numerics::{bootstrap_mean_ci, BOOTSTRAP_RESAMPLES};
use occam_core::Rng;

use crate::config::Params;
use crate::report::Cell;
use crate::{ExperimentConfig, Output, Result};

/// Stream group reserved for bootstrap resampling of summary rows.
const BOOTSTRAP_GROUP: u64 = 0xB0_0757;

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Result<Output> {
    match &cfg.params {
        Params::MarkovPosterior(p) => markov::posterior(cfg, p),
        Params::MarkovCtxSweep(p) => markov::sweep(cfg, p),
        Params::RegressionPosterior(p) => regression::posterior(cfg, p),
        Params::RegressionCtxSweep(p) => regression::sweep(cfg, p),
        Params::WishartGap(p) => wishart::run(cfg, p),
        Params::Pcfg(p) => pcfg::run(cfg, p),
        Params::AttentionVerify(p) => attention::run(cfg, p),
        Params::BooleanOracle(p) => boolean::run(cfg, p),
        Params::LlmProbe(p) => probe::run(cfg, p),
    }
}

/// `[mean, lo, hi]` of a 95% bootstrap interval; missing when `xs` is empty.
/// `row` picks a dedicated stream so each summary row is reproducible on its own.
pub(crate) fn mean_ci(seed: u64, row: usize, xs: &[f64]) -> [Cell; 3] {
    let mut rng = Rng::new(seed, crate::stream(BOOTSTRAP_GROUP, row));
    match bootstrap_mean_ci(xs, BOOTSTRAP_RESAMPLES, 0.05, &mut rng) {
        Some((m, lo, hi)) => [Cell::float(m), Cell::float(lo), Cell::float(hi)],
        None => [Cell::Missing, Cell::Missing, Cell::Missing],
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub(crate) fn fraction(flags: impl IntoIterator<Item = bool>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        hit += f as usize;
    }
    if n == 0 {
        f64::NAN
    } else {
        hit as f64 / n as f64
    }
}

pub(crate) fn config_error(msg: impl Into<String>) -> crate::HarnessError {
    crate::HarnessError::Config(msg.into())
}
