use occam_core::numerics::summarize;
use occam_core::regression::{expected_log_det, gap_context_len, sample_log_det, sample_log_det_gap, GramKind};
use occam_core::Rng;

use super::config_error;
use crate::config::WishartParams;
use crate::report::{Aggregates, Cell, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

/// Stream groups below this are the gap experiment's, keyed by `d`.
const IDENTITY_GROUP: u64 = 1 << 20;

fn kind_name(k: GramKind) -> &'static str {
    match k {
        GramKind::FullOuter => "full_outer",
        GramKind::HalfInner => "half_inner",
    }
}

pub(super) fn run(cfg: &ExperimentConfig, p: &WishartParams) -> Result<Output> {
    if p.identity_samples < 2 {
        return Err(config_error("params.identity_samples: need at least 2"));
    }
    let mut identity = Table::new(&["d", "len", "kind", "samples", "mc_mean", "mc_std_err", "analytic", "z_score"]);
    let mut agg = Aggregates::default();
    let mut worst_z: f64 = 0.0;
    for (pi, &(d, len)) in p.identity_pairs.iter().enumerate() {
        for (ki, kind) in [GramKind::FullOuter, GramKind::HalfInner].into_iter().enumerate() {
            let analytic = expected_log_det(kind, d, len).map_err(|e| config_error(format!("params.identity_pairs: {e}")))?;
            let group = IDENTITY_GROUP + 2 * pi as u64 + ki as u64;
            let xs = par_trials(p.identity_samples, |i| sample_log_det(&mut Rng::new(cfg.seed, stream(group, i)), kind, d, len))?;
            let s = summarize(&xs).expect("non-empty");
            let z = (s.mean - analytic) / s.std_err;
            worst_z = worst_z.max(z.abs());
            identity.push(vec![
                d.into(),
                len.into(),
                kind_name(kind).into(),
                p.identity_samples.into(),
                s.mean.into(),
                s.std_err.into(),
                analytic.into(),
                z.into(),
            ]);
            agg.set(format!("identity.d{d}.len{len}.{}.z_score", kind_name(kind)), z);
        }
    }
    agg.set("identity.max_abs_z", worst_z);

    let mut trials = Table::new(&["d", "len", "trial", "log_det_gap"]);
    let mut gap = Table::new(&["d", "len", "trials", "mean", "std", "std_err", "analytic", "mean_over_d_ln_d", "analytic_over_d_ln_d"]);
    let mut normalized = Vec::new();
    for &d in &p.dims {
        let len = gap_context_len(d, p.c).map_err(|e| config_error(format!("params.dims/params.c: {e}")))?;
        // same streams as occam_core::regression::log_det_gap_experiment
        let xs = par_trials(cfg.trials, |i| sample_log_det_gap(&mut Rng::new(cfg.seed, stream(d as u64, i)), d, len))?;
        for (i, &x) in xs.iter().enumerate() {
            trials.push(vec![d.into(), len.into(), i.into(), x.into()]);
        }
        let s = summarize(&xs).expect("non-empty");
        let analytic = expected_log_det(GramKind::FullOuter, d, len)? - expected_log_det(GramKind::HalfInner, d, len)?;
        let scale = d as f64 * (d as f64).ln();
        normalized.push(s.mean / scale);
        gap.push(vec![
            d.into(),
            len.into(),
            cfg.trials.into(),
            s.mean.into(),
            s.std.into(),
            s.std_err.into(),
            analytic.into(),
            Cell::float(s.mean / scale),
            Cell::float(analytic / scale),
        ]);
        agg.set(format!("gap.d{d}.mean_over_d_ln_d"), s.mean / scale);
        agg.set(format!("gap.d{d}.analytic_over_d_ln_d"), analytic / scale);
    }
    if !normalized.is_empty() {
        agg.set("gap.min_over_d_ln_d", normalized.iter().copied().fold(f64::INFINITY, f64::min));
        agg.set("gap.max_over_d_ln_d", normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(Output {
        tables: vec![("identity", identity), ("gap_trials", trials), ("gap_summary", gap)],
        aggregates: agg,
    })
}
