use occam_core::pcfg::{
    block_counts, boundary_next_distribution, generate_sequence, grammar_posterior, posterior_from_counts, sample_grammar,
    GrammarFamily, Letter, Pcfg,
};
use occam_core::{Distribution, Error, Rng};

use super::{config_error, fraction, mean, mean_ci};
use crate::config::PcfgParams;
use crate::report::{Aggregates, Cell, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

const FAMILIES: [GrammarFamily; 2] = [GrammarFamily::Simple, GrammarFamily::Complex];

fn family_name(f: GrammarFamily) -> &'static str {
    match f {
        GrammarFamily::Simple => "simple",
        GrammarFamily::Complex => "complex",
    }
}

/// Block counts `(ab, ba, aa, bb)` from depth-0 streams, drawn in batches
/// until both opening letters have `blocks` occurrences or the budget runs out.
fn monte_carlo_counts(rng: &mut Rng, g: &Pcfg, p: &PcfgParams) -> occam_core::Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    let mut total = 0u64;
    while (counts[0] + counts[2] < p.blocks || counts[1] + counts[3] < p.blocks) && total < p.max_total_blocks {
        let seq = generate_sequence(rng, g, 3 * p.batch_blocks, 0)?;
        for (c, n) in counts.iter_mut().zip(block_counts(&seq)?) {
            *c += n;
        }
        total += p.batch_blocks as u64;
    }
    Ok(counts)
}

struct BoundaryRow {
    first: Letter,
    model: Option<[f64; 2]>,
    openers: u64,
    same: u64,
}

struct GrammarTrial {
    p: Vec<f64>,
    rows: Vec<BoundaryRow>,
    p_true: f64,
}

pub(super) fn run(cfg: &ExperimentConfig, p: &PcfgParams) -> Result<Output> {
    if p.blocks == 0 || p.batch_blocks == 0 {
        return Err(config_error("params.blocks / params.batch_blocks: must be positive"));
    }
    if p.posterior_len < 3 {
        return Err(config_error("params.posterior_len: need at least 3 symbols"));
    }
    let uniform = Distribution::uniform(2)?;
    let mut boundary = Table::new(&[
        "family", "grammar", "p1", "p2", "p3", "p4", "first", "model_p_a", "model_p_b", "mc_openers", "mc_p_a", "mc_p_b",
        "abs_err", "status",
    ]);
    let mut posterior = Table::new(&["family", "grammar", "len", "p_true"]);
    let mut summary = Table::new(&["family", "grammars", "mean_p_true", "p_true_lo", "p_true_hi", "frac_map_true"]);
    let mut agg = Aggregates::default();
    let mut max_err: f64 = 0.0;
    let (mut ok_rows, mut skipped_rows) = (0usize, 0usize);
    let mut simple_zero = true;

    for (fi, family) in FAMILIES.into_iter().enumerate() {
        let results = par_trials(cfg.trials, |i| {
            let mut rng = Rng::new(cfg.seed, stream(fi as u64, i));
            let g = sample_grammar(&mut rng, family)?;
            let counts = monte_carlo_counts(&mut rng, &g, p)?;
            let rows = [Letter::A, Letter::B]
                .into_iter()
                .map(|first| {
                    let model = match boundary_next_distribution(&g, first) {
                        Ok(d) => Some([d.probs()[0], d.probs()[1]]),
                        Err(Error::DegenerateSupport(_)) => None,
                        Err(e) => return Err(e),
                    };
                    let (same, other) = match first {
                        Letter::A => (counts[2], counts[0]),
                        Letter::B => (counts[3], counts[1]),
                    };
                    Ok(BoundaryRow {
                        first,
                        model,
                        openers: same + other,
                        same,
                    })
                })
                .collect::<occam_core::Result<Vec<_>>>()?;
            let mut post_rng = Rng::new(cfg.seed, stream(2 + fi as u64, i));
            let seq = generate_sequence(&mut post_rng, &g, p.posterior_len, 0)?;
            let post = grammar_posterior(&seq, &uniform)?;
            Ok(GrammarTrial {
                p: g.p().probs().to_vec(),
                rows,
                p_true: post.posterior.probs()[fi],
            })
        })?;

        for (i, t) in results.iter().enumerate() {
            for r in &t.rows {
                let (first, same_idx) = match r.first {
                    Letter::A => ("a", 0),
                    Letter::B => ("b", 1),
                };
                let mc = (r.openers > 0).then(|| {
                    let same = r.same as f64 / r.openers as f64;
                    if same_idx == 0 {
                        [same, 1.0 - same]
                    } else {
                        [1.0 - same, same]
                    }
                });
                let (err, status) = match (r.model, mc) {
                    (None, _) => (None, "undefined"),
                    (Some(_), _) if r.openers < p.blocks => (None, "insufficient"),
                    (Some(m), Some(e)) => (Some((m[0] - e[0]).abs().max((m[1] - e[1]).abs())), "ok"),
                    (Some(_), None) => (None, "insufficient"),
                };
                match status {
                    "ok" => {
                        ok_rows += 1;
                        max_err = max_err.max(err.expect("ok rows have an error"));
                    }
                    _ => skipped_rows += 1,
                }
                if family == GrammarFamily::Simple {
                    // P(a|a) and P(b|b): the model must give exactly zero and no aa/bb block may appear
                    let model_same = r.model.map(|m| m[same_idx]);
                    simple_zero &= model_same.is_none_or(|x| x == 0.0) && r.same == 0;
                }
                let mut row: Vec<Cell> = vec![family_name(family).into(), i.into()];
                row.extend(t.p.iter().map(|&x| Cell::float(x)));
                row.push(first.into());
                row.push(Cell::opt(r.model.map(|m| m[0])));
                row.push(Cell::opt(r.model.map(|m| m[1])));
                row.push(r.openers.into());
                row.push(Cell::opt(mc.map(|m| m[0])));
                row.push(Cell::opt(mc.map(|m| m[1])));
                row.push(Cell::opt(err));
                row.push(status.into());
                boundary.push(row);
            }
            posterior.push(vec![family_name(family).into(), i.into(), p.posterior_len.into(), t.p_true.into()]);
        }
        let pts: Vec<f64> = results.iter().map(|t| t.p_true).collect();
        let [m, lo, hi] = mean_ci(cfg.seed, fi, &pts);
        let map_true = fraction(pts.iter().map(|&x| x > 0.5));
        summary.push(vec![family_name(family).into(), cfg.trials.into(), m, lo, hi, map_true.into()]);
        agg.set(format!("posterior.{}.mean_p_true", family_name(family)), mean(&pts));
        agg.set(format!("posterior.{}.frac_map_true", family_name(family)), map_true);
    }

    // every (n1, n2) with 1 <= n1 + n2 <= limit and no aa/bb blocks; zero blocks leave the prior
    let mut enumeration = Table::new(&["n_ab", "n_ba", "p_simple", "prefers_simple"]);
    let mut min_simple = f64::INFINITY;
    for n1 in 0..=p.count_limit {
        for n2 in (if n1 == 0 { 1 } else { 0 })..=p.count_limit - n1 {
            let ps = posterior_from_counts(&[n1, n2, 0, 0], &uniform)?.posterior.probs()[0];
            min_simple = min_simple.min(ps);
            enumeration.push(vec![n1.into(), n2.into(), ps.into(), (ps > 0.5).into()]);
        }
    }

    agg.set("boundary.max_abs_err", max_err);
    agg.set("boundary.ok_rows", ok_rows as f64);
    agg.set("boundary.skipped_rows", skipped_rows as f64);
    agg.set("simple.exact_zero_same_letter", f64::from(u8::from(simple_zero)));
    agg.set("enumeration.min_p_simple", min_simple);
    agg.set("enumeration.pairs", enumeration.rows.len() as f64);
    Ok(Output {
        tables: vec![
            ("boundary", boundary),
            ("posterior_trials", posterior),
            ("posterior_summary", summary),
            ("enumeration", enumeration),
        ],
        aggregates: agg,
    })
}
