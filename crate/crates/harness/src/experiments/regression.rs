use occam_core::regression::{dim_posterior, generate_context, sample_task, TaskFamily};
use occam_core::Rng;

use super::{config_error, fraction, mean, mean_ci};
use crate::config::{RegressionPosteriorParams, RegressionSweepParams};
use crate::report::{Aggregates, Cell, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Trial {
    p_simple: f64,
    log_density_half: f64,
    log_density_full: f64,
    rel_err: f64,
    norm_half: f64,
    norm_full: f64,
    /// Squared query errors against the true weights: Bayes, half, full.
    sq_err: [f64; 3],
}

impl Trial {
    fn p_true(&self, family: TaskFamily) -> f64 {
        match family {
            TaskFamily::Simple => self.p_simple,
            TaskFamily::Complex => 1.0 - self.p_simple,
        }
    }
}

fn one_trial(rng: &mut Rng, d: usize, len: usize, family: TaskFamily) -> occam_core::Result<Trial> {
    let task = sample_task(rng, d, family)?;
    let ctx = generate_context(rng, &task, len)?;
    let post = dim_posterior(&ctx)?;
    let diff: Vec<f64> = post.w_bayes.iter().zip(&post.w_half).map(|(a, b)| a - b).collect();
    let truth = dot(&ctx.query, &task.weights);
    let err = |w: &[f64]| (dot(&ctx.query, w) - truth).powi(2);
    let norm_half = norm(&post.w_half);
    Ok(Trial {
        p_simple: post.simple_mass(),
        log_density_half: post.log_densities[0],
        log_density_full: post.log_densities[1],
        rel_err: if norm_half > 0.0 { norm(&diff) / norm_half } else { f64::NAN },
        norm_half,
        norm_full: norm(&post.w_full),
        sq_err: [err(&post.w_bayes), err(&post.w_half), err(&post.w_full)],
    })
}

fn family_name(f: TaskFamily) -> &'static str {
    match f {
        TaskFamily::Simple => "simple",
        TaskFamily::Complex => "complex",
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(config_error(format!("params.dim: must be even and >= 2, got {d}")));
    }
    Ok(())
}

const TRIAL_COLUMNS: [&str; 13] = [
    "family",
    "trial",
    "d",
    "len",
    "p_simple",
    "log_density_half",
    "log_density_full",
    "rel_err_bayes_vs_half",
    "norm_w_half",
    "norm_w_full",
    "sq_err_bayes",
    "sq_err_half",
    "sq_err_full",
];

fn trial_row(family: TaskFamily, i: usize, d: usize, len: usize, t: &Trial) -> Vec<Cell> {
    vec![
        family_name(family).into(),
        i.into(),
        d.into(),
        len.into(),
        t.p_simple.into(),
        t.log_density_half.into(),
        t.log_density_full.into(),
        t.rel_err.into(),
        t.norm_half.into(),
        t.norm_full.into(),
        t.sq_err[0].into(),
        t.sq_err[1].into(),
        t.sq_err[2].into(),
    ]
}

pub(super) fn posterior(cfg: &ExperimentConfig, p: &RegressionPosteriorParams) -> Result<Output> {
    check_dim(p.dim)?;
    if p.len == 0 {
        return Err(config_error("params.len: must be at least 1"));
    }
    let mut trials = Table::new(&TRIAL_COLUMNS);
    let mut summary = Table::new(&["family", "trials", "frac_pass", "mean_p_true", "p_true_lo", "p_true_hi"]);
    let mut agg = Aggregates::default();
    for (g, (family, n)) in [(TaskFamily::Simple, cfg.trials), (TaskFamily::Complex, p.complex_trials)]
        .into_iter()
        .enumerate()
    {
        if n == 0 {
            continue;
        }
        let results = par_trials(n, |i| one_trial(&mut Rng::new(cfg.seed, stream(g as u64, i)), p.dim, p.len, family))?;
        for (i, t) in results.iter().enumerate() {
            trials.push(trial_row(family, i, p.dim, p.len, t));
        }
        // simple: confident and close to the restricted solution; complex: certain
        let pass = fraction(results.iter().map(|t| match family {
            TaskFamily::Simple => t.p_simple > 0.99 && t.rel_err < 0.01,
            TaskFamily::Complex => t.p_simple == 0.0,
        }));
        let pts: Vec<f64> = results.iter().map(|t| t.p_true(family)).collect();
        let [m, lo, hi] = mean_ci(cfg.seed, g, &pts);
        summary.push(vec![family_name(family).into(), n.into(), pass.into(), m, lo, hi]);
        let key = family_name(family);
        agg.set(format!("{key}.frac_pass"), pass);
        agg.set(format!("{key}.mean_p_true"), mean(&pts));
        agg.set(format!("{key}.min_p_true"), pts.iter().copied().fold(f64::INFINITY, f64::min));
        agg.set(format!("{key}.frac_p_true_gt_0.99"), fraction(pts.iter().map(|&x| x > 0.99)));
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}

pub(super) fn sweep(cfg: &ExperimentConfig, p: &RegressionSweepParams) -> Result<Output> {
    for &d in &p.dims {
        check_dim(d)?;
    }
    let lens: Vec<usize> = if p.lens.is_empty() { (1..=p.max_len).collect() } else { p.lens.clone() };
    if lens.is_empty() || lens.contains(&0) {
        return Err(config_error("params.lens: lengths must be positive"));
    }
    let mut trials = Table::new(&TRIAL_COLUMNS);
    let mut summary = Table::new(&[
        "family",
        "d",
        "len",
        "trials",
        "mean_p_true",
        "p_true_lo",
        "p_true_hi",
        "mean_sq_err_bayes_over_d",
        "mean_sq_err_half_over_d",
        "mean_sq_err_full_over_d",
    ]);
    let mut agg = Aggregates::default();
    let mut row = 0;
    for &d in &p.dims {
        for (fi, family) in [TaskFamily::Simple, TaskFamily::Complex].into_iter().enumerate() {
            for &len in &lens {
                let group = ((d as u64) << 16) | ((fi as u64) << 12) | len as u64;
                let results = par_trials(cfg.trials, |i| one_trial(&mut Rng::new(cfg.seed, stream(group, i)), d, len, family))?;
                for (i, t) in results.iter().enumerate() {
                    trials.push(trial_row(family, i, d, len, t));
                }
                let pts: Vec<f64> = results.iter().map(|t| t.p_true(family)).collect();
                let err = |k: usize| mean(&results.iter().map(|t| t.sq_err[k] / d as f64).collect::<Vec<_>>());
                let [m, lo, hi] = mean_ci(cfg.seed, row, &pts);
                row += 1;
                summary.push(vec![
                    family_name(family).into(),
                    d.into(),
                    len.into(),
                    cfg.trials.into(),
                    m,
                    lo,
                    hi,
                    err(0).into(),
                    err(1).into(),
                    err(2).into(),
                ]);
                let key = format!("{}.d{d}.len{len}", family_name(family));
                agg.set(format!("{key}.mean_p_true"), mean(&pts));
                agg.set(format!("{key}.mean_sq_err_bayes_over_d"), err(0));
            }
        }
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}
