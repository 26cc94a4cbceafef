use occam_core::boolean::{bayes_label, gen_prompt, hypothesis_posterior, BooleanPrompt, PromptMode};
use occam_core::Rng;

use super::{config_error, mean_ci};
use crate::config::BooleanParams;
use crate::report::{Aggregates, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

pub(crate) fn mode_name(m: PromptMode) -> &'static str {
    match m {
        PromptMode::Ambiguous => "ambiguous",
        PromptMode::Complex => "complex",
    }
}

pub(crate) fn bits(x: &[u8]) -> String {
    x.iter().map(|b| char::from(b'0' + b)).collect()
}

/// Stream group of one `(mode, d, n)` cell.
pub(crate) fn cell_group(mode: PromptMode, d: usize, n: usize) -> u64 {
    let m = match mode {
        PromptMode::Ambiguous => 0,
        PromptMode::Complex => 1,
    };
    (m << 24) | ((d as u64) << 12) | n as u64
}

pub(crate) fn check_cells(dims: &[usize], ns: &[usize], modes: &[PromptMode]) -> Result<()> {
    if dims.iter().any(|&d| !(5..4096).contains(&d)) {
        return Err(config_error("params.dims: each d must be in 5..4096"));
    }
    if ns.is_empty() || ns.iter().any(|&n| !(1..4096).contains(&n)) {
        return Err(config_error("params.n_examples: each n must be in 1..4096"));
    }
    if dims.is_empty() || modes.is_empty() {
        return Err(config_error("params.dims / params.modes: must not be empty"));
    }
    Ok(())
}

pub(super) fn run(cfg: &ExperimentConfig, p: &BooleanParams) -> Result<Output> {
    check_cells(&p.dims, &p.n_examples, &p.modes)?;
    let mut trials = Table::new(&[
        "mode",
        "d",
        "n_examples",
        "trial",
        "triple",
        "query",
        "simple_label",
        "complex_label",
        "bayes_label",
        "margin",
        "simple_family_mass",
        "live_simple",
        "live_complex",
    ]);
    let mut summary = Table::new(&[
        "mode",
        "d",
        "n_examples",
        "trials",
        "agree_simple_mean",
        "agree_simple_lo",
        "agree_simple_hi",
        "agree_complex_mean",
        "agree_complex_lo",
        "agree_complex_hi",
    ]);
    let mut agg = Aggregates::default();
    let mut row = 0;
    for &mode in &p.modes {
        for &d in &p.dims {
            for &n in &p.n_examples {
                let group = cell_group(mode, d, n);
                let results = par_trials(cfg.trials, |i| {
                    let mut rng = Rng::new(cfg.seed, stream(group, i));
                    let prompt: BooleanPrompt = gen_prompt(&mut rng, d, n, mode, p.triple_policy)?;
                    let post = hypothesis_posterior(&prompt.examples, d)?;
                    let label = bayes_label(&post, &prompt.query)?;
                    Ok((prompt, post, label))
                })?;
                let mut simple = Vec::with_capacity(results.len());
                let mut complex = Vec::with_capacity(results.len());
                for (i, (prompt, post, label)) in results.iter().enumerate() {
                    simple.push(f64::from(u8::from(label.label == prompt.simple_label())));
                    complex.push(f64::from(u8::from(label.label == prompt.complex_label())));
                    let t = prompt.triple;
                    trials.push(vec![
                        mode_name(mode).into(),
                        d.into(),
                        n.into(),
                        i.into(),
                        format!("{}-{}-{}", t[0], t[1], t[2]).into(),
                        bits(&prompt.query).into(),
                        prompt.simple_label().into(),
                        prompt.complex_label().into(),
                        label.label.into(),
                        label.margin.into(),
                        post.family_posterior.probs()[0].into(),
                        post.live_simple().into(),
                        post.live_complex().into(),
                    ]);
                }
                let [sm, slo, shi] = mean_ci(cfg.seed, 2 * row, &simple);
                let [cm, clo, chi] = mean_ci(cfg.seed, 2 * row + 1, &complex);
                row += 1;
                summary.push(vec![mode_name(mode).into(), d.into(), n.into(), cfg.trials.into(), sm, slo, shi, cm, clo, chi]);
                let key = format!("{}.d{d}.n{n}", mode_name(mode));
                agg.set(format!("{key}.agree_simple"), super::mean(&simple));
                agg.set(format!("{key}.agree_complex"), super::mean(&complex));
            }
        }
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}
