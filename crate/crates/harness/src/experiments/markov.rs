use occam_core::markov::{
    generate_sequence, mixture_predict, ngram_counts, order_posterior, predict_ngram, sample_chain, EvidenceMethod,
    PosteriorReport, Smoothing, TokenSequence,
};
use occam_core::numerics::kl_divergence;
use occam_core::{Distribution, Rng};

use super::{config_error, fraction, mean, mean_ci};
use crate::config::{default_markov_len, MarkovPosteriorParams, MarkovSweepParams};
use crate::report::{Aggregates, Cell, Table};
use crate::{par_trials, stream, ExperimentConfig, Output, Result};

fn check_orders(vocab_size: usize, orders: &[usize], true_orders: &[usize]) -> Result<()> {
    if vocab_size < 2 {
        return Err(config_error("params.vocab_size: need at least 2 symbols"));
    }
    if orders.is_empty() || true_orders.is_empty() {
        return Err(config_error("params.orders / params.true_orders: must not be empty"));
    }
    if let Some(s) = true_orders.iter().find(|s| !orders.contains(s)) {
        return Err(config_error(format!("params.true_orders: order {s} is not a candidate")));
    }
    Ok(())
}

/// KL from the raw true-order estimate to the Bayes mixture at the final
/// position, when the final context was followed at least `min_visits` times.
fn final_kl(
    seq: &TokenSequence,
    true_order: usize,
    orders: &[usize],
    post: &PosteriorReport,
    min_visits: u64,
) -> occam_core::Result<(u64, Option<f64>)> {
    let visits = ngram_counts(seq, true_order)?.context_count(seq.last_context(true_order)?);
    if visits < min_visits || visits == 0 {
        return Ok((visits, None));
    }
    let raw = predict_ngram(seq, true_order, Smoothing::Raw)?;
    let bayes = mixture_predict(seq, orders, &post.posterior)?;
    Ok((visits, Some(kl_divergence(&raw, &bayes)?)))
}

struct PosteriorTrial {
    p_true_exact: f64,
    p_true_bic: f64,
    map_exact: usize,
    map_bic: usize,
    visits: u64,
    kl: Option<f64>,
    exact: Vec<f64>,
}

pub(super) fn posterior(cfg: &ExperimentConfig, p: &MarkovPosteriorParams) -> Result<Output> {
    check_orders(p.vocab_size, &p.orders, &p.true_orders)?;
    let lens: Vec<usize> = match p.lens.len() {
        0 => vec![default_markov_len(&p.orders); p.true_orders.len()],
        1 => vec![p.lens[0]; p.true_orders.len()],
        n if n == p.true_orders.len() => p.lens.clone(),
        _ => return Err(config_error("params.lens: give one length or one per true order")),
    };
    let prior = Distribution::uniform(p.orders.len())?;

    let mut trials_cols = vec![
        "true_order",
        "trial",
        "len",
        "p_true_exact",
        "p_true_bic",
        "map_order_exact",
        "map_order_bic",
        "last_context_visits",
        "kl_raw_vs_bayes",
    ];
    let order_cols: Vec<String> = p.orders.iter().map(|s| format!("p_order_{s}")).collect();
    trials_cols.extend(order_cols.iter().map(String::as_str));
    let mut trials = Table::new(&trials_cols);
    let mut summary = Table::new(&[
        "true_order",
        "len",
        "trials",
        "frac_p_true_gt_0.95",
        "mean_p_true",
        "p_true_lo",
        "p_true_hi",
        "map_agreement_exact_bic",
        "kl_trials",
        "mean_kl",
    ]);
    let mut agg = Aggregates::default();

    for (row, (&s_true, &len)) in p.true_orders.iter().zip(&lens).enumerate() {
        let idx = p.orders.iter().position(|&s| s == s_true).expect("checked");
        let results = par_trials(cfg.trials, |i| {
            let mut rng = Rng::new(cfg.seed, stream(s_true as u64, i));
            let chain = sample_chain(&mut rng, s_true, p.vocab_size, p.alpha)?;
            let seq = generate_sequence(&mut rng, &chain, len)?;
            let exact = order_posterior(&seq, &p.orders, &prior, EvidenceMethod::Exact)?;
            let bic = order_posterior(&seq, &p.orders, &prior, EvidenceMethod::Bic)?;
            let (visits, kl) = final_kl(&seq, s_true, &p.orders, &exact, p.kl_min_visits)?;
            Ok(PosteriorTrial {
                p_true_exact: exact.posterior.probs()[idx],
                p_true_bic: bic.posterior.probs()[idx],
                map_exact: p.orders[exact.map_index()],
                map_bic: p.orders[bic.map_index()],
                visits,
                kl,
                exact: exact.posterior.into_vec(),
            })
        })?;
        for (i, t) in results.iter().enumerate() {
            let mut r: Vec<Cell> = vec![
                s_true.into(),
                i.into(),
                len.into(),
                t.p_true_exact.into(),
                t.p_true_bic.into(),
                t.map_exact.into(),
                t.map_bic.into(),
                t.visits.into(),
                Cell::opt(t.kl),
            ];
            r.extend(t.exact.iter().map(|&x| Cell::float(x)));
            trials.push(r);
        }
        let p_true: Vec<f64> = results.iter().map(|t| t.p_true_exact).collect();
        let kls: Vec<f64> = results.iter().filter_map(|t| t.kl).collect();
        let frac = fraction(p_true.iter().map(|&x| x > 0.95));
        let agree = fraction(results.iter().map(|t| t.map_exact == t.map_bic));
        let [m, lo, hi] = mean_ci(cfg.seed, row, &p_true);
        summary.push(vec![
            s_true.into(),
            len.into(),
            cfg.trials.into(),
            frac.into(),
            m,
            lo,
            hi,
            agree.into(),
            kls.len().into(),
            Cell::float(mean(&kls)),
        ]);
        let key = format!("order-{s_true}");
        agg.set(format!("{key}.frac_p_true_gt_0.95"), frac);
        agg.set(format!("{key}.mean_p_true"), mean(&p_true));
        agg.set(format!("{key}.map_agreement_exact_bic"), agree);
        agg.set(format!("{key}.mean_kl"), mean(&kls));
        agg.set(format!("{key}.kl_trials"), kls.len() as f64);
        agg.set(
            format!("{key}.frac_true_map_exact"),
            fraction(results.iter().map(|t| t.map_exact == s_true)),
        );
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}

pub(super) fn sweep(cfg: &ExperimentConfig, p: &MarkovSweepParams) -> Result<Output> {
    check_orders(p.vocab_size, &p.orders, &p.true_orders)?;
    let max_order = *p.orders.iter().max().expect("non-empty");
    if p.lens.is_empty() || p.lens.iter().any(|&l| l <= max_order) {
        return Err(config_error("params.lens: every length must exceed the largest order"));
    }
    let max_len = *p.lens.iter().max().expect("non-empty");
    let prior = Distribution::uniform(p.orders.len())?;

    let mut trials = Table::new(&["true_order", "trial", "len", "p_true", "map_order", "last_context_visits", "kl_raw_vs_bayes"]);
    let mut summary = Table::new(&["true_order", "len", "trials", "mean_p_true", "p_true_lo", "p_true_hi", "kl_trials", "mean_kl"]);
    let mut agg = Aggregates::default();
    let mut row = 0;
    for &s_true in &p.true_orders {
        let idx = p.orders.iter().position(|&s| s == s_true).expect("checked");
        let results = par_trials(cfg.trials, |i| {
            let mut rng = Rng::new(cfg.seed, stream(s_true as u64, i));
            let chain = sample_chain(&mut rng, s_true, p.vocab_size, p.alpha)?;
            let full = generate_sequence(&mut rng, &chain, max_len)?;
            p.lens
                .iter()
                .map(|&len| {
                    let seq = TokenSequence::new(full.tokens()[..len].to_vec(), p.vocab_size)?;
                    let post = order_posterior(&seq, &p.orders, &prior, p.evidence)?;
                    let (visits, kl) = final_kl(&seq, s_true, &p.orders, &post, p.kl_min_visits)?;
                    Ok((post.posterior.probs()[idx], p.orders[post.map_index()], visits, kl))
                })
                .collect::<occam_core::Result<Vec<_>>>()
        })?;
        for (i, per_len) in results.iter().enumerate() {
            for (&len, &(pt, map, visits, kl)) in p.lens.iter().zip(per_len) {
                trials.push(vec![s_true.into(), i.into(), len.into(), pt.into(), map.into(), visits.into(), Cell::opt(kl)]);
            }
        }
        for (j, &len) in p.lens.iter().enumerate() {
            let pts: Vec<f64> = results.iter().map(|r| r[j].0).collect();
            let kls: Vec<f64> = results.iter().filter_map(|r| r[j].3).collect();
            let [m, lo, hi] = mean_ci(cfg.seed, row, &pts);
            row += 1;
            summary.push(vec![s_true.into(), len.into(), cfg.trials.into(), m, lo, hi, kls.len().into(), Cell::float(mean(&kls))]);
            agg.set(format!("order-{s_true}.len-{len}.mean_p_true"), mean(&pts));
            agg.set(format!("order-{s_true}.len-{len}.mean_kl"), mean(&kls));
        }
    }
    Ok(Output {
        tables: vec![("trials", trials), ("summary", summary)],
        aggregates: agg,
    })
}
