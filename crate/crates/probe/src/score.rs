use std::collections::BTreeMap;
use std::io::Write;

use occam_core::boolean::{BooleanPrompt, PromptMode};
use occam_core::numerics::{bootstrap_mean_ci, format_sig, BOOTSTRAP_RESAMPLES};
use occam_core::Rng;
use serde::{Deserialize, Serialize};

use crate::render::parse_label;
use crate::{ProbeError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub prompt_id: usize,
    pub raw_completion: String,
    pub parsed_label: Option<u8>,
    pub agree_simple: Option<bool>,
    pub agree_complex: Option<bool>,
}

impl ProbeResult {
    pub fn new(prompt_id: usize, raw_completion: String, prompt: &BooleanPrompt) -> Self {
        let parsed_label = parse_label(&raw_completion);
        Self {
            prompt_id,
            parsed_label,
            agree_simple: parsed_label.map(|y| y == prompt.simple_label()),
            agree_complex: parsed_label.map(|y| y == prompt.complex_label()),
            raw_completion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub n_examples: usize,
    pub d: usize,
    pub mode: PromptMode,
    /// `None` when every completion in the cell was unparseable.
    pub agree_simple: Option<(f64, f64, f64)>,
    pub agree_complex: Option<(f64, f64, f64)>,
    pub unparseable_rate: f64,
}

pub const SCORE_COLUMNS: [&str; 10] = [
    "n_examples",
    "d",
    "mode",
    "agree_simple_mean",
    "agree_simple_lo",
    "agree_simple_hi",
    "agree_complex_mean",
    "agree_complex_lo",
    "agree_complex_hi",
    "unparseable_rate",
];

fn mode_key(m: PromptMode) -> u8 {
    match m {
        PromptMode::Ambiguous => 0,
        PromptMode::Complex => 1,
    }
}

/// Per (mode, d, n) means with 95% bootstrap intervals. `prompts[i]` has id `i`;
/// every id must appear in `results` exactly once.
pub fn score_run(prompts: &[BooleanPrompt], results: &[ProbeResult], seed: u64) -> Result<Vec<ScoreRow>> {
    if results.len() != prompts.len() {
        return Err(ProbeError::Alignment(format!(
            "{} results for {} prompts",
            results.len(),
            prompts.len()
        )));
    }
    let mut seen = vec![false; prompts.len()];
    let mut cells: BTreeMap<(u8, usize, usize), Vec<&ProbeResult>> = BTreeMap::new();
    for r in results {
        let p = prompts
            .get(r.prompt_id)
            .ok_or_else(|| ProbeError::Alignment(format!("unknown prompt id {}", r.prompt_id)))?;
        if std::mem::replace(&mut seen[r.prompt_id], true) {
            return Err(ProbeError::Alignment(format!("duplicate prompt id {}", r.prompt_id)));
        }
        cells
            .entry((mode_key(p.mode), p.dim, p.examples.len()))
            .or_default()
            .push(r);
    }
    let mut rng = Rng::new(seed, 0);
    Ok(cells
        .into_iter()
        .map(|((mode, d, n), mut rs)| {
            rs.sort_by_key(|r| r.prompt_id);
            let simple: Vec<f64> = rs.iter().filter_map(|r| r.agree_simple).map(f64::from).collect();
            let complex: Vec<f64> = rs.iter().filter_map(|r| r.agree_complex).map(f64::from).collect();
            ScoreRow {
                n_examples: n,
                d,
                mode: if mode == 0 { PromptMode::Ambiguous } else { PromptMode::Complex },
                agree_simple: bootstrap_mean_ci(&simple, BOOTSTRAP_RESAMPLES, 0.05, &mut rng),
                agree_complex: bootstrap_mean_ci(&complex, BOOTSTRAP_RESAMPLES, 0.05, &mut rng),
                unparseable_rate: rs.iter().filter(|r| r.parsed_label.is_none()).count() as f64 / rs.len() as f64,
            }
        })
        .collect())
}

pub fn write_score_csv<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_COLUMNS)?;
    let triple = |c: Option<(f64, f64, f64)>| match c {
        Some((m, lo, hi)) => [m, lo, hi].map(|x| format_sig(x, 12)),
        None => [String::new(), String::new(), String::new()],
    };
    for r in rows {
        let mode = match r.mode {
            PromptMode::Ambiguous => "ambiguous",
            PromptMode::Complex => "complex",
        };
        let mut rec = vec![r.n_examples.to_string(), r.d.to_string(), mode.to_string()];
        rec.extend(triple(r.agree_simple));
        rec.extend(triple(r.agree_complex));
        rec.push(format_sig(r.unparseable_rate, 12));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| ProbeError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use occam_core::boolean::{gen_prompt, TriplePolicy};

    fn prompts(k: usize) -> Vec<BooleanPrompt> {
        (0..k)
            .map(|i| {
                gen_prompt(&mut Rng::new(i as u64, 0), 5, 1 + i % 3, PromptMode::Ambiguous, TriplePolicy::IncludeZero)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn all_simple_answers() {
        let ps = prompts(30);
        let rs: Vec<ProbeResult> = ps
            .iter()
            .enumerate()
            .map(|(i, p)| ProbeResult::new(i, p.simple_label().to_string(), p))
            .collect();
        let rows = score_run(&ps, &rs, 0).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.agree_simple.unwrap(), (1.0, 1.0, 1.0));
            assert_eq!(r.agree_complex.unwrap(), (0.0, 0.0, 0.0));
            assert_eq!(r.unparseable_rate, 0.0);
        }
        // idempotent
        assert_eq!(rows, score_run(&ps, &rs, 0).unwrap());
    }

    #[test]
    fn all_unparseable() {
        let ps = prompts(6);
        let rs: Vec<ProbeResult> = ps.iter().enumerate().map(|(i, p)| ProbeResult::new(i, "maybe".into(), p)).collect();
        for r in score_run(&ps, &rs, 0).unwrap() {
            assert!(r.agree_simple.is_none() && r.agree_complex.is_none());
            assert_eq!(r.unparseable_rate, 1.0);
        }
        let mut buf = Vec::new();
        write_score_csv(&score_run(&ps, &rs, 0).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == SCORE_COLUMNS.len()));
    }

    #[test]
    fn agreement_flags_are_complementary() {
        let ps = prompts(20);
        for (i, p) in ps.iter().enumerate() {
            let r = ProbeResult::new(i, format!("{}", i % 2), p);
            assert!(r.agree_simple.unwrap() ^ r.agree_complex.unwrap());
        }
    }

    #[test]
    fn misaligned_results() {
        let ps = prompts(3);
        let r = |i| ProbeResult::new(i, "0".into(), &ps[0]);
        assert!(matches!(score_run(&ps, &[r(0), r(1)], 0), Err(ProbeError::Alignment(_))));
        assert!(matches!(score_run(&ps, &[r(0), r(1), r(1)], 0), Err(ProbeError::Alignment(_))));
        assert!(matches!(score_run(&ps, &[r(0), r(1), r(7)], 0), Err(ProbeError::Alignment(_))));
    }
}
