//! Copy-bit versus majority-of-three prompts and the exact Bayesian oracle
//! over both families.
//!
//! The simple family holds the `d` functions `x ↦ x[i]`; the complex family
//! holds the `C(d,3)` functions `x ↦ Maj(x[i], x[j], x[k])`. Each family gets
//! prior ½, split uniformly among its members.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{Distribution, Rng};

pub const MAX_REJECTIONS: usize = 100_000;
pub const TIE_MARGIN: f64 = 1e-12;

pub type Bits = Vec<u8>;
pub type Triple = [usize; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    /// Every label equals both `x[0]` and the majority.
    Ambiguous,
    /// Every label is the majority and differs from `x[0]`.
    Complex,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriplePolicy {
    #[default]
    IncludeZero,
    ExcludeZero,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub x: Bits,
    pub y: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanPrompt {
    pub dim: usize,
    pub triple: Triple,
    pub examples: Vec<Example>,
    pub query: Bits,
    pub mode: PromptMode,
}

impl BooleanPrompt {
    pub fn simple_label(&self) -> u8 {
        self.query[0]
    }

    pub fn complex_label(&self) -> u8 {
        majority(&self.query, self.triple)
    }
}

pub fn majority(x: &[u8], t: Triple) -> u8 {
    u8::from(x[t[0]] + x[t[1]] + x[t[2]] >= 2)
}

/// All index triples `i < j < k` in lexicographic order.
pub fn all_triples(d: usize) -> Vec<Triple> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                out.push([i, j, k]);
            }
        }
    }
    out
}

fn random_bits(rng: &mut Rng, d: usize) -> Bits {
    (0..d).map(|_| rng.bit()).collect()
}

fn sample_until(rng: &mut Rng, d: usize, accept: impl Fn(&[u8]) -> bool) -> Result<Bits> {
    for _ in 0..MAX_REJECTIONS {
        let x = random_bits(rng, d);
        if accept(&x) {
            return Ok(x);
        }
    }
    Err(Error::Infeasible(format!(
        "no acceptable input after {MAX_REJECTIONS} draws"
    )))
}

/// Samples a triple, `n_examples` examples satisfying the mode, and an
/// unambiguous query.
pub fn gen_prompt(
    rng: &mut Rng,
    dim: usize,
    n_examples: usize,
    mode: PromptMode,
    policy: TriplePolicy,
) -> Result<BooleanPrompt> {
    if dim < 5 {
        return Err(domain(format!("boolean prompts need d >= 5, got {dim}")));
    }
    if n_examples == 0 {
        return Err(domain("need at least one example"));
    }
    let triples: Vec<Triple> = all_triples(dim)
        .into_iter()
        .filter(|t| policy == TriplePolicy::IncludeZero || t[0] != 0)
        .collect();
    let triple = triples[rng.below(triples.len())];
    let examples = (0..n_examples)
        .map(|_| {
            let x = match mode {
                PromptMode::Ambiguous => sample_until(rng, dim, |x| x[0] == majority(x, triple))?,
                PromptMode::Complex => sample_until(rng, dim, |x| x[0] != majority(x, triple))?,
            };
            let y = majority(&x, triple);
            Ok(Example { x, y })
        })
        .collect::<Result<Vec<_>>>()?;
    let query = sample_until(rng, dim, |x| x[0] != majority(x, triple))?;
    Ok(BooleanPrompt {
        dim,
        triple,
        examples,
        query,
        mode,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPosterior {
    pub dim: usize,
    /// Indexed by the copied bit.
    pub simple_mass: Vec<f64>,
    /// Aligned with `triples`.
    pub complex_mass: Vec<f64>,
    pub triples: Vec<Triple>,
    /// `[simple, complex]`
    pub family_posterior: Distribution,
}

impl HypothesisPosterior {
    pub fn live_simple(&self) -> usize {
        self.simple_mass.iter().filter(|&&m| m > 0.0).count()
    }

    pub fn live_complex(&self) -> usize {
        self.complex_mass.iter().filter(|&&m| m > 0.0).count()
    }

    pub fn triple_mass(&self, t: Triple) -> f64 {
        let mut t = t;
        t.sort_unstable();
        self.triples
            .iter()
            .position(|&u| u == t)
            .map_or(0.0, |i| self.complex_mass[i])
    }
}

/// Exact posterior over all `d + C(d,3)` hypotheses.
pub fn hypothesis_posterior(examples: &[Example], dim: usize) -> Result<HypothesisPosterior> {
    if dim < 3 {
        return Err(domain(format!("need d >= 3, got {dim}")));
    }
    if let Some(e) = examples.iter().find(|e| e.x.len() != dim || e.y > 1 || e.x.iter().any(|&b| b > 1)) {
        return Err(domain(format!("malformed example {e:?} for d = {dim}")));
    }
    let triples = all_triples(dim);
    let simple_prior = 0.5 / dim as f64;
    let complex_prior = 0.5 / triples.len() as f64;
    let mut simple_mass: Vec<f64> = (0..dim)
        .map(|i| {
            if examples.iter().all(|e| e.x[i] == e.y) {
                simple_prior
            } else {
                0.0
            }
        })
        .collect();
    let mut complex_mass: Vec<f64> = triples
        .iter()
        .map(|&t| {
            if examples.iter().all(|e| majority(&e.x, t) == e.y) {
                complex_prior
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = simple_mass.iter().sum::<f64>() + complex_mass.iter().sum::<f64>();
    if total == 0.0 {
        return Err(Error::InconsistentContext);
    }
    simple_mass.iter_mut().for_each(|m| *m /= total);
    complex_mass.iter_mut().for_each(|m| *m /= total);
    let s: f64 = simple_mass.iter().sum();
    let c: f64 = complex_mass.iter().sum();
    let family_posterior = Distribution::from_weights(vec![s, c])?;
    Ok(HypothesisPosterior {
        dim,
        simple_mass,
        complex_mass,
        triples,
        family_posterior,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesLabel {
    pub label: u8,
    /// `P(y = 1) − P(y = 0)` under the posterior.
    pub margin: f64,
}

/// Posterior-weighted vote at `query`.
pub fn bayes_label(post: &HypothesisPosterior, query: &[u8]) -> Result<BayesLabel> {
    if query.len() != post.dim {
        return Err(domain(format!(
            "query has {} bits, posterior is over d = {}",
            query.len(),
            post.dim
        )));
    }
    let signed = |b: u8| if b == 1 { 1.0 } else { -1.0 };
    let simple: f64 = post
        .simple_mass
        .iter()
        .enumerate()
        .map(|(i, m)| m * signed(query[i]))
        .sum();
    let complex: f64 = post
        .triples
        .iter()
        .zip(&post.complex_mass)
        .map(|(&t, m)| m * signed(majority(query, t)))
        .sum();
    let margin = simple + complex;
    let label = if margin > TIE_MARGIN {
        1
    } else if margin < -TIE_MARGIN {
        0
    } else if simple > TIE_MARGIN {
        1
    } else if simple < -TIE_MARGIN {
        0
    } else {
        query[0]
    };
    Ok(BayesLabel { label, margin })
}
