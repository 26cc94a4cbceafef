//! Fixed-order Markov chains with Dirichlet-distributed rows, their n-gram
//! statistics, and Bayesian selection of the chain order.
//!
//! The generative model: draw an order `s`, draw each of the `V^s` transition
//! rows from a symmetric Dirichlet, emit `s` uniform prefix symbols, then
//! follow the chain. Under the Dir(1) prior the evidence `p(X | s)` has a closed
//! form, and the posterior over `s` weights the per-order add-one predictors in
//! the Bayes-optimal next-token law.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{log_gamma, sample_dirichlet, Distribution, Rng};

/// Row-stochastic transition table of an order-`s` chain over `[V]`.
///
/// Row `k` holds the law of the next symbol after the context whose base-`V`
/// digits (oldest symbol most significant) spell `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovProcess {
    order: usize,
    vocab_size: usize,
    transitions: Vec<Distribution>,
}

impl MarkovProcess {
    pub fn new(order: usize, vocab_size: usize, transitions: Vec<Distribution>) -> Result<Self> {
        check_shape(order, vocab_size)?;
        let rows = vocab_size.pow(order as u32);
        if transitions.len() != rows {
            return Err(domain(format!(
                "order-{order} chain over {vocab_size} symbols needs {rows} rows, got {}",
                transitions.len()
            )));
        }
        if transitions.iter().any(|r| r.len() != vocab_size) {
            return Err(domain("transition row length differs from vocabulary size"));
        }
        Ok(Self {
            order,
            vocab_size,
            transitions,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn transitions(&self) -> &[Distribution] {
        &self.transitions
    }

    pub fn row(&self, context: &[usize]) -> &Distribution {
        &self.transitions[context_index(context, self.vocab_size)]
    }

    /// The same process written as an order-`order` table: every extended
    /// context reuses the row of its most recent `self.order` symbols.
    pub fn lift(&self, order: usize) -> Result<Self> {
        if order < self.order {
            return Err(domain(format!(
                "cannot lift an order-{} chain down to order {order}",
                self.order
            )));
        }
        let v = self.vocab_size;
        let keep = v.pow(self.order as u32);
        let transitions = (0..v.pow(order as u32))
            .map(|k| self.transitions[k % keep].clone())
            .collect();
        Self::new(order, v, transitions)
    }
}

fn check_shape(order: usize, vocab_size: usize) -> Result<()> {
    if order == 0 {
        return Err(domain("chain order must be at least 1"));
    }
    if vocab_size < 2 {
        return Err(domain("vocabulary needs at least 2 symbols"));
    }
    Ok(())
}

fn context_index(context: &[usize], vocab_size: usize) -> usize {
    context.iter().fold(0, |acc, &x| acc * vocab_size + x)
}

/// Symbols over `[vocab_size]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<usize>,
    vocab_size: usize,
}

impl TokenSequence {
    pub fn new(tokens: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(domain("empty vocabulary"));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(domain(format!("token {t} outside vocabulary of size {vocab_size}")));
        }
        Ok(Self { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The last `order` tokens, i.e. the context of the next prediction.
    pub fn last_context(&self, order: usize) -> Result<&[usize]> {
        if self.tokens.len() < order {
            return Err(domain(format!(
                "sequence of length {} has no order-{order} context",
                self.tokens.len()
            )));
        }
        Ok(&self.tokens[self.tokens.len() - order..])
    }
}

/// Sliding-window transition counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramStats {
    order: usize,
    vocab_size: usize,
    context_counts: BTreeMap<Vec<usize>, u64>,
    transition_counts: BTreeMap<Vec<usize>, Vec<u64>>,
}

impl NGramStats {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of windows whose first `order` symbols equal `context`.
    pub fn context_count(&self, context: &[usize]) -> u64 {
        self.context_counts.get(context).copied().unwrap_or(0)
    }

    pub fn transition_count(&self, context: &[usize], next: usize) -> u64 {
        self.transition_counts
            .get(context)
            .map_or(0, |row| row[next])
    }

    /// Observed contexts with their per-successor counts, in lexicographic order.
    pub fn rows(&self) -> impl Iterator<Item = (&[usize], &[u64])> {
        self.transition_counts
            .iter()
            .map(|(ctx, row)| (ctx.as_slice(), row.as_slice()))
    }

    pub fn context_counts(&self) -> &BTreeMap<Vec<usize>, u64> {
        &self.context_counts
    }

    pub fn total_windows(&self) -> u64 {
        self.context_counts.values().sum()
    }

    fn empty(order: usize, vocab_size: usize) -> Self {
        Self {
            order,
            vocab_size,
            context_counts: BTreeMap::new(),
            transition_counts: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    Raw,
    AddOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMethod {
    Exact,
    Bic,
}

/// Log-evidence and posterior over a finite hypothesis set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub hypotheses: Vec<String>,
    pub log_marginals: Vec<f64>,
    pub posterior: Distribution,
    pub prior: Distribution,
}

impl PosteriorReport {
    /// Combines log-evidence with a prior; `-inf` evidence gets zero mass.
    pub fn from_log_marginals(
        hypotheses: Vec<String>,
        log_marginals: Vec<f64>,
        prior: Distribution,
    ) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(domain("no hypotheses"));
        }
        if hypotheses.len() != log_marginals.len() || prior.len() != log_marginals.len() {
            return Err(domain(format!(
                "{} hypotheses, {} log-marginals, prior over {}",
                hypotheses.len(),
                log_marginals.len(),
                prior.len()
            )));
        }
        let joint: Vec<f64> = log_marginals
            .iter()
            .zip(prior.probs())
            .map(|(&l, &p)| if p == 0.0 { f64::NEG_INFINITY } else { l + p.ln() })
            .collect();
        let posterior = Distribution::from_log_weights(&joint).map_err(|_| {
            Error::DegenerateEvidence("every hypothesis has zero prior-weighted evidence".into())
        })?;
        Ok(Self {
            hypotheses,
            log_marginals,
            posterior,
            prior,
        })
    }

    pub fn map_index(&self) -> usize {
        self.posterior.argmax()
    }

    pub fn mass(&self, hypothesis: &str) -> Option<f64> {
        self.hypotheses
            .iter()
            .position(|h| h == hypothesis)
            .map(|i| self.posterior.probs()[i])
    }
}

/// Draws a chain whose `V^s` rows are i.i.d. symmetric Dir(alpha).
pub fn sample_chain(rng: &mut Rng, order: usize, vocab_size: usize, alpha: f64) -> Result<MarkovProcess> {
    check_shape(order, vocab_size)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(domain(format!("dirichlet concentration must be positive, got {alpha}")));
    }
    let conc = vec![alpha; vocab_size];
    let transitions = (0..vocab_size.pow(order as u32))
        .map(|_| sample_dirichlet(rng, &conc))
        .collect::<Result<_>>()?;
    MarkovProcess::new(order, vocab_size, transitions)
}

/// `len` symbols: `s` uniform prefix symbols, then chain transitions.
pub fn generate_sequence(rng: &mut Rng, chain: &MarkovProcess, len: usize) -> Result<TokenSequence> {
    if len < chain.order {
        return Err(domain(format!(
            "sequence length {len} is shorter than the chain order {}",
            chain.order
        )));
    }
    let prefix: Vec<usize> = (0..chain.order).map(|_| rng.below(chain.vocab_size)).collect();
    continue_sequence(rng, chain, prefix, len)
}

/// Like [`generate_sequence`] but with a caller-fixed prefix of `chain.order()` symbols.
pub fn generate_with_prefix(
    rng: &mut Rng,
    chain: &MarkovProcess,
    prefix: &[usize],
    len: usize,
) -> Result<TokenSequence> {
    if prefix.len() != chain.order || len < chain.order {
        return Err(domain("prefix must hold exactly `order` symbols and fit in `len`"));
    }
    if prefix.iter().any(|&x| x >= chain.vocab_size) {
        return Err(domain("prefix symbol outside vocabulary"));
    }
    continue_sequence(rng, chain, prefix.to_vec(), len)
}

fn continue_sequence(
    rng: &mut Rng,
    chain: &MarkovProcess,
    mut tokens: Vec<usize>,
    len: usize,
) -> Result<TokenSequence> {
    let s = chain.order;
    tokens.reserve(len.saturating_sub(tokens.len()));
    while tokens.len() < len {
        let ctx = &tokens[tokens.len() - s..];
        let next = rng.categorical(chain.row(ctx).probs());
        tokens.push(next);
    }
    TokenSequence::new(tokens, chain.vocab_size)
}

/// Counts every length-`order + 1` window. Needs at least one window.
pub fn ngram_counts(seq: &TokenSequence, order: usize) -> Result<NGramStats> {
    if seq.len() <= order {
        return Err(domain(format!(
            "sequence of length {} has no window of length {}",
            seq.len(),
            order + 1
        )));
    }
    Ok(count_windows(seq, order))
}

// Tolerates sequences without windows (empty statistics).
fn count_windows(seq: &TokenSequence, order: usize) -> NGramStats {
    let v = seq.vocab_size;
    let mut stats = NGramStats::empty(order, v);
    for w in seq.tokens.windows(order + 1) {
        let (ctx, next) = w.split_at(order);
        *stats.context_counts.entry(ctx.to_vec()).or_insert(0) += 1;
        stats
            .transition_counts
            .entry(ctx.to_vec())
            .or_insert_with(|| vec![0; v])[next[0]] += 1;
    }
    stats
}

/// Next-symbol law after the last `order` tokens, from in-context counts.
///
/// `Raw` is the empirical conditional and fails on a context never followed by
/// anything; `AddOne` is the Dir(1) posterior mean and falls back to uniform.
pub fn predict_ngram(seq: &TokenSequence, order: usize, smoothing: Smoothing) -> Result<Distribution> {
    let ctx = seq.last_context(order)?;
    let stats = count_windows(seq, order);
    let v = seq.vocab_size;
    let total = stats.context_count(ctx);
    let counts: Vec<u64> = (0..v).map(|u| stats.transition_count(ctx, u)).collect();
    match smoothing {
        Smoothing::Raw => {
            if total == 0 {
                return Err(Error::UnseenContext {
                    context: ctx.to_vec(),
                });
            }
            Distribution::from_weights(counts.iter().map(|&c| c as f64).collect())
        }
        Smoothing::AddOne => {
            let denom = (total + v as u64) as f64;
            Distribution::from_weights(counts.iter().map(|&c| (c + 1) as f64 / denom).collect())
        }
    }
}

/// ln p(X | s) under uniform prefix symbols and Dir(1) transition rows.
///
/// A sequence of exactly `order` symbols contributes only its prefix term.
pub fn log_marginal_exact(seq: &TokenSequence, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(domain("evidence needs an order of at least 1"));
    }
    if seq.len() < order {
        return Err(domain(format!(
            "order-{order} evidence needs at least {order} symbols, got {}",
            seq.len()
        )));
    }
    let v = seq.vocab_size as f64;
    let stats = count_windows(seq, order);
    let lg_v = log_gamma(v)?;
    let mut total = -(order as f64) * v.ln();
    for (_, row) in stats.rows() {
        let n: u64 = row.iter().sum();
        total += lg_v - log_gamma(v + n as f64)?;
        for &c in row {
            total += log_gamma(1.0 + c as f64)?;
        }
    }
    Ok(total)
}

/// Parts of the BIC evidence approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicTerms {
    /// `order · ln(1/V)` for the uniform prefix.
    pub prefix: f64,
    /// Σ ln p̂(x_t | previous `order` symbols), t = order+1 … T.
    pub empirical: f64,
    /// `V^s (V − 1) / 2 · ln T`.
    pub penalty: f64,
}

impl BicTerms {
    pub fn total(&self) -> f64 {
        self.prefix + self.empirical - self.penalty
    }
}

pub fn bic_terms(seq: &TokenSequence, order: usize) -> Result<BicTerms> {
    let stats = ngram_counts(seq, order)?;
    let v = seq.vocab_size;
    let mut empirical = 0.0;
    for (_, row) in stats.rows() {
        let n: u64 = row.iter().sum();
        for &c in row.iter().filter(|&&c| c > 0) {
            empirical += c as f64 * (c as f64 / n as f64).ln();
        }
    }
    let free_params = (v.pow(order as u32) * (v - 1)) as f64;
    Ok(BicTerms {
        prefix: -(order as f64) * (v as f64).ln(),
        empirical,
        penalty: 0.5 * free_params * (seq.len() as f64).ln(),
    })
}

/// BIC-style approximation of ln p(X | s): maximized likelihood minus the
/// parameter-count penalty. The empirical sum starts at t = s + 1, so orders
/// differ by O(1) in how many terms they see.
pub fn log_marginal_bic(seq: &TokenSequence, order: usize) -> Result<f64> {
    Ok(bic_terms(seq, order)?.total())
}

pub fn log_marginal(seq: &TokenSequence, order: usize, method: EvidenceMethod) -> Result<f64> {
    match method {
        EvidenceMethod::Exact => log_marginal_exact(seq, order),
        EvidenceMethod::Bic => log_marginal_bic(seq, order),
    }
}

/// Posterior over candidate orders.
pub fn order_posterior(
    seq: &TokenSequence,
    orders: &[usize],
    prior: &Distribution,
    method: EvidenceMethod,
) -> Result<PosteriorReport> {
    if orders.is_empty() {
        return Err(domain("no candidate orders"));
    }
    let log_marginals = orders
        .iter()
        .map(|&s| log_marginal(seq, s, method))
        .collect::<Result<Vec<_>>>()?;
    PosteriorReport::from_log_marginals(
        orders.iter().map(|s| format!("order-{s}")).collect(),
        log_marginals,
        prior.clone(),
    )
}

/// Bayes-optimal next-symbol law: Σ_s p(s | X) · add-one order-s prediction.
pub fn bayes_predict(
    seq: &TokenSequence,
    orders: &[usize],
    prior: &Distribution,
    method: EvidenceMethod,
) -> Result<Distribution> {
    let report = order_posterior(seq, orders, prior, method)?;
    mixture_predict(seq, orders, &report.posterior)
}

/// Mixes add-one per-order predictors with the given weights over `orders`.
pub fn mixture_predict(seq: &TokenSequence, orders: &[usize], weights: &Distribution) -> Result<Distribution> {
    let mut out = vec![0.0; seq.vocab_size];
    for (&s, &w) in orders.iter().zip(weights.probs()) {
        if w == 0.0 {
            continue;
        }
        let pred = predict_ngram(seq, s, Smoothing::AddOne)?;
        for (o, p) in out.iter_mut().zip(pred.probs()) {
            *o += w * p;
        }
    }
    Distribution::from_weights(out)
}
