use occam_core::boolean::{bayes_label, gen_prompt, hypothesis_posterior, BooleanPrompt};
use occam_core::Rng;
use occam_probe::{
    parse_rendered, render_prompt, run_prompts, score_run, Completion, CompletionModel, HttpModel, ProbeError,
    ProbeResult, DEFAULT_TEMPLATE, SCORE_COLUMNS,
};

use super::boolean::{bits, cell_group, check_cells, mode_name};
use crate::config::{ProbeBackend, ProbeParams};
use crate::report::{Aggregates, Cell, Table};
use crate::{par_trials, stream, ExperimentConfig, HarnessError, Output, Result};

/// Reads the rendered prompt back and answers with the exact Bayes label.
struct BayesOracle;

impl CompletionModel for BayesOracle {
    fn complete(&self, prompt: &str) -> occam_probe::Result<Completion> {
        let (examples, query) = parse_rendered(prompt)?;
        let post = hypothesis_posterior(&examples, query.len()).map_err(|e| ProbeError::Protocol(e.to_string()))?;
        let label = bayes_label(&post, &query).map_err(|e| ProbeError::Protocol(e.to_string()))?;
        Ok(Completion {
            text: label.label.to_string(),
            retries: 0,
        })
    }
}

pub(super) fn run(cfg: &ExperimentConfig, p: &ProbeParams) -> Result<Output> {
    check_cells(&p.dims, &p.n_examples, &p.modes)?;
    let template = p.template.as_deref().unwrap_or(DEFAULT_TEMPLATE);

    let mut prompts: Vec<BooleanPrompt> = Vec::new();
    for &mode in &p.modes {
        for &d in &p.dims {
            for &n in &p.n_examples {
                let group = cell_group(mode, d, n);
                prompts.extend(par_trials(cfg.trials, |i| {
                    gen_prompt(&mut Rng::new(cfg.seed, stream(group, i)), d, n, mode, p.triple_policy)
                })?);
            }
        }
    }
    let texts = prompts
        .iter()
        .map(|pr| render_prompt(pr, template))
        .collect::<occam_probe::Result<Vec<_>>>()?;

    let completions = match p.backend {
        ProbeBackend::BayesOracle => run_prompts(&BayesOracle, &texts, p.client.max_in_flight),
        ProbeBackend::Http => {
            let mut client = p.client.clone();
            client.load_key_from_env()?;
            let in_flight = client.max_in_flight;
            run_prompts(&HttpModel::new(client)?, &texts, in_flight)
        }
    };
    if !completions.is_empty() && completions.iter().all(|c| c.is_err()) {
        let first = completions.into_iter().next().expect("non-empty");
        return Err(HarnessError::Probe(first.expect_err("all failed")));
    }

    let mut results_table = Table::new(&[
        "prompt_id",
        "mode",
        "d",
        "n_examples",
        "query",
        "simple_label",
        "complex_label",
        "raw_completion",
        "parsed_label",
        "agree_simple",
        "agree_complex",
        "retries",
        "error",
    ]);
    let mut results = Vec::with_capacity(prompts.len());
    for (id, (prompt, c)) in prompts.iter().zip(completions).enumerate() {
        let (raw, retries, error) = match c {
            Ok(c) => (c.text, Cell::from(c.retries as u64), Cell::Missing),
            Err(e) => (String::new(), Cell::Missing, Cell::from(e.to_string())),
        };
        let r = ProbeResult::new(id, raw, prompt);
        results_table.push(vec![
            id.into(),
            mode_name(prompt.mode).into(),
            prompt.dim.into(),
            prompt.examples.len().into(),
            bits(&prompt.query).into(),
            prompt.simple_label().into(),
            prompt.complex_label().into(),
            r.raw_completion.clone().into(),
            r.parsed_label.map_or(Cell::Missing, Cell::from),
            r.agree_simple.map_or(Cell::Missing, Cell::from),
            r.agree_complex.map_or(Cell::Missing, Cell::from),
            retries,
            error,
        ]);
        results.push(r);
    }

    let rows = score_run(&prompts, &results, cfg.seed)?;
    let mut scores = Table::new(&SCORE_COLUMNS);
    let mut agg = Aggregates::default();
    let triple = |c: Option<(f64, f64, f64)>| match c {
        Some((m, lo, hi)) => [Cell::float(m), Cell::float(lo), Cell::float(hi)],
        None => [Cell::Missing, Cell::Missing, Cell::Missing],
    };
    for r in &rows {
        let mut row: Vec<Cell> = vec![r.n_examples.into(), r.d.into(), mode_name(r.mode).into()];
        row.extend(triple(r.agree_simple));
        row.extend(triple(r.agree_complex));
        row.push(r.unparseable_rate.into());
        scores.push(row);
        let key = format!("{}.d{}.n{}", mode_name(r.mode), r.d, r.n_examples);
        if let Some((m, _, _)) = r.agree_simple {
            agg.set(format!("{key}.agree_simple"), m);
        }
        if let Some((m, _, _)) = r.agree_complex {
            agg.set(format!("{key}.agree_complex"), m);
        }
        agg.set(format!("{key}.unparseable_rate"), r.unparseable_rate);
    }
    Ok(Output {
        tables: vec![("results", results_table), ("scores", scores)],
        aggregates: agg,
    })
}
