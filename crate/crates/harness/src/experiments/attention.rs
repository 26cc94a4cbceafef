use occam_core::attention::verify_construction;
use occam_core::numerics::format_sig;
use occam_core::Rng;

use super::{config_error, mean};
use crate::config::AttentionParams;
use crate::report::{Aggregates, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

pub(super) fn run(cfg: &ExperimentConfig, p: &AttentionParams) -> Result<Output> {
    if p.c_values.is_empty() || p.c_values.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
        return Err(config_error("params.c_values: need positive finite values"));
    }
    if p.len < 3 {
        return Err(config_error("params.len: need at least 3 tokens"));
    }
    // every c sees the same sequence for a given trial
    let results = par_trials(cfg.trials, |i| {
        p.c_values
            .iter()
            .map(|&c| verify_construction(&mut Rng::new(cfg.seed, stream(0, i)), p.vocab_size, p.len, c))
            .collect::<occam_core::Result<Vec<_>>>()
    })?;

    let mut trials = Table::new(&["trial", "c", "max_abs_error", "excluded_rows", "residual_correction"]);
    for (i, per_c) in results.iter().enumerate() {
        for (&c, r) in p.c_values.iter().zip(per_c) {
            let excluded = r.excluded_rows.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            trials.push(vec![i.into(), c.into(), r.max_abs_error.into(), excluded.into(), r.residual_correction.into()]);
        }
    }
    let mut summary = Table::new(&["c", "trials", "max_error", "mean_error", "trial0_error"]);
    let mut agg = Aggregates::default();
    for (j, &c) in p.c_values.iter().enumerate() {
        let errs: Vec<f64> = results.iter().map(|r| r[j].max_abs_error).collect();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        summary.push(vec![c.into(), cfg.trials.into(), worst.into(), mean(&errs).into(), errs[0].into()]);
        let key = format!("c{}", format_sig(c, 12));
        agg.set(format!("{key}.max_error"), worst);
        agg.set(format!("{key}.mean_error"), mean(&errs));
        agg.set(format!("{key}.trial0_error"), errs[0]);
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}
