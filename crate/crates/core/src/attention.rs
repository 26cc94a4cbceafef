//! Two-layer, attention-only transformer with relative position terms, and an
//! explicit weight setting under which the last position reads out every
//! empirical bigram conditional `p(u | v)` at once.
//!
//! Scores follow `A_ij = (z_i W_Q + r_{i-j+1}) W_K z_jᵀ / √d` with a causal
//! mask, each layer adds its input back (residual), layer 2 runs one head per
//! vocabulary symbol, and `W_O` maps the concatenated heads to `V²` outputs.
//!
//! Layout of the bigram extractor (embedding dimension `3V`, blocks of `V`):
//! - embedding `[e_x, e_x, 0]`;
//! - layer 1 attends to the previous position and copies its middle block, so
//!   `z'_i = [e_{x_i}, e_{x_i} + e_{x_{i-1}}, 0]`;
//! - head `v` of layer 2 scores key `j` by `[x_{j-1} = v]` and averages
//!   `[0, 0, e_{x_j}]` over matching positions;
//! - `W_O` keeps the third block of every head.
//!
//! With finite saturation `c` the result is exact up to `O(T e^{-c})`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::markov::{generate_sequence, ngram_counts, sample_chain, TokenSequence};
use crate::numerics::{Matrix, Rng};

/// Query, key and value matrices of one head, all `d × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadWeights {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
}

impl HeadWeights {
    fn zeros(d: usize) -> Self {
        Self {
            query: Matrix::zeros(d, d),
            key: Matrix::zeros(d, d),
            value: Matrix::zeros(d, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// `V × d`
    pub embedding: Matrix,
    pub layer1: HeadWeights,
    /// Row `k − 1` holds `r_k`, the term for offset `i − j + 1 = k`. Offsets
    /// beyond the stored rows contribute zero.
    pub rel_pos: Matrix,
    pub layer2: Vec<HeadWeights>,
    /// `V² × (d · heads)`
    pub output: Matrix,
    /// Saturation constant the weights were built with (informational).
    pub saturation: f64,
    /// Layer-2 queries past the first position ignore key position 1, which
    /// has no predecessor to copy in layer 1.
    pub mask_first_key: bool,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `T × d` input embeddings.
    pub embedded: Matrix,
    /// Pre-softmax layer-1 scores (masked entries are `-inf`).
    pub layer1_scores: Matrix,
    pub layer1_weights: Matrix,
    /// `T × d` after layer 1 and its residual.
    pub hidden: Matrix,
    pub layer2_weights: Vec<Matrix>,
    /// Per head, `T × d` after layer 2 and its residual.
    pub heads: Vec<Matrix>,
    /// `T × V²`
    pub output: Matrix,
}

fn softmax_rows(scores: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(scores.nrows(), scores.ncols());
    for i in 0..scores.nrows() {
        let row = scores.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..scores.ncols() {
            let e = if row[j] == f64::NEG_INFINITY {
                0.0
            } else {
                (row[j] - max).exp()
            };
            out[(i, j)] = e;
            sum += e;
        }
        for j in 0..scores.ncols() {
            out[(i, j)] /= sum;
        }
    }
    out
}

/// Masked scores of one head: `(z_i W_Q + r_{i-j+1}) W_K z_jᵀ / √d`.
fn head_scores(z: &Matrix, head: &HeadWeights, rel_pos: Option<&Matrix>, skip_first_key: bool) -> Matrix {
    let t = z.nrows();
    let scale = (z.ncols() as f64).sqrt();
    let queries = z * &head.query;
    let keys = z * head.key.transpose(); // row j is (W_K z_jᵀ)ᵀ
    let mut scores = Matrix::from_element(t, t, f64::NEG_INFINITY);
    for i in 0..t {
        let first = if skip_first_key && i > 0 { 1 } else { 0 };
        for j in first..=i {
            let mut q = queries.row(i).into_owned();
            if let Some(r) = rel_pos {
                let k = i - j; // offset i − j + 1, stored at row k
                if k < r.nrows() {
                    q += r.row(k);
                }
            }
            scores[(i, j)] = q.dot(&keys.row(j)) / scale;
        }
    }
    scores
}

impl AttentionStack {
    fn check(&self) -> Result<()> {
        let d = self.embed_dim;
        let heads_ok = std::iter::once(&self.layer1)
            .chain(&self.layer2)
            .all(|h| [&h.query, &h.key, &h.value].iter().all(|m| m.shape() == (d, d)));
        if self.embedding.shape() != (self.vocab_size, d)
            || !heads_ok
            || self.rel_pos.ncols() != d
            || self.output.ncols() != d * self.layer2.len()
        {
            return Err(domain("attention stack weights have inconsistent shapes"));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate.
    pub fn trace(&self, seq: &TokenSequence) -> Result<ForwardTrace> {
        self.check()?;
        if let Some(&bad) = seq.tokens().iter().find(|&&x| x >= self.vocab_size) {
            return Err(domain(format!(
                "token {bad} outside vocabulary of size {}",
                self.vocab_size
            )));
        }
        if seq.is_empty() {
            return Err(domain("empty input sequence"));
        }
        let t = seq.len();
        let d = self.embed_dim;
        let embedded = Matrix::from_fn(t, d, |i, k| self.embedding[(seq.tokens()[i], k)]);

        let layer1_scores = head_scores(&embedded, &self.layer1, Some(&self.rel_pos), false);
        let layer1_weights = softmax_rows(&layer1_scores);
        let hidden = &layer1_weights * &embedded * &self.layer1.value + &embedded;

        let mut layer2_weights = Vec::with_capacity(self.layer2.len());
        let mut heads = Vec::with_capacity(self.layer2.len());
        let mut concat = Matrix::zeros(t, d * self.layer2.len());
        for (h, head) in self.layer2.iter().enumerate() {
            let w = softmax_rows(&head_scores(&hidden, head, None, self.mask_first_key));
            let out = &w * &hidden * &head.value + &hidden;
            concat.columns_mut(h * d, d).copy_from(&out);
            layer2_weights.push(w);
            heads.push(out);
        }
        let output = concat * self.output.transpose();
        Ok(ForwardTrace {
            embedded,
            layer1_scores,
            layer1_weights,
            hidden,
            layer2_weights,
            heads,
            output,
        })
    }
}

/// Per-position outputs, `T × V²`; the last row is the prediction.
pub fn attention_forward(stack: &AttentionStack, seq: &TokenSequence) -> Result<Matrix> {
    Ok(stack.trace(seq)?.output)
}

/// Weights that make the last position output `p(·|v)` in block `v`.
///
/// Layer-1 scores are exactly `c` on the previous position and 0 elsewhere.
/// Layer-2 queries sum the middle block (2 from position 2 on), so matching
/// keys score `2c`.
pub fn build_bigram_extractor(vocab_size: usize, c: f64) -> Result<AttentionStack> {
    if vocab_size < 2 {
        return Err(domain("vocabulary needs at least 2 symbols"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(domain(format!("saturation constant must be positive, got {c}")));
    }
    let v = vocab_size;
    let d = 3 * v;
    let scaled = c * (d as f64).sqrt();
    let (first, middle, third) = (0, v, 2 * v);

    let mut embedding = Matrix::zeros(v, d);
    for x in 0..v {
        embedding[(x, first + x)] = 1.0;
        embedding[(x, middle + x)] = 1.0;
    }

    let mut layer1 = HeadWeights::zeros(d);
    for a in 0..v {
        layer1.key[(first + a, first + a)] = scaled;
        layer1.value[(middle + a, middle + a)] = 1.0;
    }
    // r_2 = 1 (offset j = i − 1), every other r_k = 0
    let mut rel_pos = Matrix::zeros(2, d);
    rel_pos.row_mut(1).fill(1.0);

    let layer2 = (0..v)
        .map(|target| {
            let mut h = HeadWeights::zeros(d);
            for a in 0..v {
                h.query[(middle + a, middle + target)] = 1.0;
                h.value[(first + a, third + a)] = 1.0;
            }
            h.key[(middle + target, first + target)] = -scaled;
            h.key[(middle + target, middle + target)] = scaled;
            h
        })
        .collect();

    let mut output = Matrix::zeros(v * v, d * v);
    for head in 0..v {
        for u in 0..v {
            output[(head * v + u, head * d + third + u)] = 1.0;
        }
    }

    Ok(AttentionStack {
        vocab_size: v,
        embed_dim: d,
        embedding,
        layer1,
        rel_pos,
        layer2,
        output,
        saturation: c,
        mask_first_key: true,
    })
}

/// `V × V` table, row `v` = `p(·|v)`. Rows never observed as a predecessor are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub rows: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub max_abs_error: f64,
    /// Read from the construction's final position.
    pub table: ConditionalTable,
    /// From transition counts.
    pub expected: ConditionalTable,
    /// Symbols that never precede another symbol; their rows are not compared.
    pub excluded_rows: Vec<usize>,
    /// Largest entry of the reconstructed residual `P z'_T` that was removed
    /// from each head's block (zero for this construction).
    pub residual_correction: f64,
}

/// Runs the extractor on `seq` and compares its last output with counted conditionals.
pub fn verify_on_sequence(stack: &AttentionStack, seq: &TokenSequence) -> Result<VerifyReport> {
    let v = stack.vocab_size;
    let t = seq.len();
    if t < 2 {
        return Err(domain("need at least two tokens to observe a transition"));
    }
    let out = attention_forward(stack, seq)?;
    let last = out.row(t - 1);

    // z'_T rebuilt from the embedding of x_T and x_{T-1}; W_O reads its third block
    let (x_t, x_prev) = (seq.tokens()[t - 1], seq.tokens()[t - 2]);
    let mut z_last = stack.embedding.row(x_t).into_owned();
    let prev = stack.embedding.row(x_prev).into_owned();
    for k in 0..stack.embed_dim {
        z_last[k] += stack.layer1.value.column(k).dot(&prev.transpose());
    }
    let residual: Vec<f64> = (0..v).map(|u| z_last[2 * v + u]).collect();
    let residual_correction = residual.iter().map(|x| x.abs()).fold(0.0, f64::max);

    let stats = ngram_counts(seq, 1)?;
    let mut table = Vec::with_capacity(v);
    let mut expected = Vec::with_capacity(v);
    let mut excluded_rows = Vec::new();
    let mut max_abs_error: f64 = 0.0;
    for ctx in 0..v {
        let n = stats.context_count(&[ctx]);
        if n == 0 {
            excluded_rows.push(ctx);
            table.push(None);
            expected.push(None);
            continue;
        }
        let got: Vec<f64> = (0..v).map(|u| last[ctx * v + u] - residual[u]).collect();
        let want: Vec<f64> = (0..v)
            .map(|u| stats.transition_count(&[ctx], u) as f64 / n as f64)
            .collect();
        for (g, w) in got.iter().zip(&want) {
            max_abs_error = max_abs_error.max((g - w).abs());
        }
        table.push(Some(got));
        expected.push(Some(want));
    }
    Ok(VerifyReport {
        max_abs_error,
        table: ConditionalTable { rows: table },
        expected: ConditionalTable { rows: expected },
        excluded_rows,
        residual_correction,
    })
}

/// Samples an order-1 Dir(1) chain and a length-`len` sequence from it, then
/// checks the extractor built with saturation `c`.
pub fn verify_construction(rng: &mut Rng, vocab_size: usize, len: usize, c: f64) -> Result<VerifyReport> {
    if len < 3 {
        return Err(domain(format!("verification needs T >= 3, got {len}")));
    }
    let chain = sample_chain(rng, 1, vocab_size, 1.0)?;
    let seq = generate_sequence(rng, &chain, len)?;
    verify_on_sequence(&build_bigram_extractor(vocab_size, c)?, &seq)
}
