//! A four-production grammar family over `{a, b, eos}`:
//!
//! ```text
//! S -> A B C | B A C | A A C | B B C     (p1..p4)
//! C -> S | eos                          (q1, q2)
//! A -> a,  B -> b
//! ```
//!
//! The simple subfamily fixes `p3 = p4 = 0`. Derivations are leftmost and the
//! depth counts `C -> S` expansions; at depth `d_max` the `C` is forced to
//! `eos`, so `d_max = 0` yields only the strings `xy eos`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::markov::PosteriorReport;
use crate::numerics::{log_gamma, sample_dirichlet, Distribution, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    A,
    B,
    Eos,
}

impl Symbol {
    /// Serialization code: a = 0, b = 1, eos = 2.
    pub fn code(self) -> u8 {
        match self {
            Symbol::A => 0,
            Symbol::B => 1,
            Symbol::Eos => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Symbol::A),
            1 => Ok(Symbol::B),
            2 => Ok(Symbol::Eos),
            _ => Err(domain(format!("symbol code {code} is not in {{0, 1, 2}}"))),
        }
    }

    fn letter(self) -> Option<Letter> {
        match self {
            Symbol::A => Some(Letter::A),
            Symbol::B => Some(Letter::B),
            Symbol::Eos => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Letter {
    A,
    B,
}

impl From<Letter> for Symbol {
    fn from(l: Letter) -> Self {
        match l {
            Letter::A => Symbol::A,
            Letter::B => Symbol::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrammarFamily {
    Simple,
    Complex,
}

/// The four S-productions in the order of their probabilities.
pub const S_PRODUCTIONS: [(Letter, Letter); 4] = [
    (Letter::A, Letter::B),
    (Letter::B, Letter::A),
    (Letter::A, Letter::A),
    (Letter::B, Letter::B),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pcfg {
    p: Distribution,
    q: Distribution,
    family: GrammarFamily,
}

impl Pcfg {
    pub fn new(p: Distribution, q: Distribution, family: GrammarFamily) -> Result<Self> {
        if p.len() != 4 || q.len() != 2 {
            return Err(domain("need 4 S-production and 2 C-production probabilities"));
        }
        if family == GrammarFamily::Simple && (p.probs()[2] != 0.0 || p.probs()[3] != 0.0) {
            return Err(domain("simple grammars must have p3 = p4 = 0"));
        }
        Ok(Self { p, q, family })
    }

    pub fn p(&self) -> &Distribution {
        &self.p
    }

    pub fn q(&self) -> &Distribution {
        &self.q
    }

    pub fn family(&self) -> GrammarFamily {
        self.family
    }
}

pub type SymbolSequence = Vec<Symbol>;

pub fn sample_grammar(rng: &mut Rng, family: GrammarFamily) -> Result<Pcfg> {
    let p = match family {
        GrammarFamily::Complex => sample_dirichlet(rng, &[1.0; 4])?,
        GrammarFamily::Simple => {
            let pair = sample_dirichlet(rng, &[1.0; 2])?;
            Distribution::new(vec![pair.probs()[0], pair.probs()[1], 0.0, 0.0])?
        }
    };
    let q = sample_dirichlet(rng, &[1.0; 2])?;
    Pcfg::new(p, q, family)
}

/// Appends one complete derivation from `S` to `out`.
fn derive(rng: &mut Rng, g: &Pcfg, max_depth: usize, out: &mut SymbolSequence) {
    let mut depth = 0;
    loop {
        let (x, y) = S_PRODUCTIONS[rng.categorical(g.p.probs())];
        out.push(x.into());
        out.push(y.into());
        // C -> S with prob q1 while below the depth cap
        if depth < max_depth && rng.uniform() < g.q.probs()[0] {
            depth += 1;
            continue;
        }
        out.push(Symbol::Eos);
        return;
    }
}

/// Concatenates derivations from `S` until `len` symbols, truncating the last one.
///
/// The stream always starts at a derivation boundary.
pub fn generate_sequence(rng: &mut Rng, g: &Pcfg, len: usize, max_depth: usize) -> Result<SymbolSequence> {
    if len < 3 {
        return Err(domain(format!("sequence length must be at least 3, got {len}")));
    }
    let mut out = Vec::with_capacity(len + 3 * (max_depth + 1));
    while out.len() < len {
        derive(rng, g, max_depth, &mut out);
    }
    out.truncate(len);
    Ok(out)
}

/// Law of the second letter of a depth-0 block given its first letter, as `[P(a), P(b)]`.
pub fn boundary_next_distribution(g: &Pcfg, first: Letter) -> Result<Distribution> {
    let p = g.p.probs();
    // productions opening with `first`: (p_same, p_other)
    let (same, other) = match first {
        Letter::A => (p[2], p[0]),
        Letter::B => (p[3], p[1]),
    };
    let total = same + other;
    if total == 0.0 {
        return Err(Error::DegenerateSupport(format!(
            "no S-production opens with {first:?}"
        )));
    }
    match first {
        Letter::A => Distribution::new(vec![same / total, other / total]),
        Letter::B => Distribution::new(vec![other / total, same / total]),
    }
}

/// Counts of the four block types `(ab, ba, aa, bb)` in a depth-0 stream.
///
/// A trailing incomplete block (truncation) is ignored.
pub fn block_counts(seq: &[Symbol]) -> Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    let mut chunks = seq.chunks_exact(3);
    for (i, block) in chunks.by_ref().enumerate() {
        let pos = 3 * i;
        let parse_letter = |s: Symbol, at: usize| {
            s.letter().ok_or(Error::Parse {
                position: at,
                message: "expected a letter, found eos".into(),
            })
        };
        let x = parse_letter(block[0], pos)?;
        let y = parse_letter(block[1], pos + 1)?;
        if block[2] != Symbol::Eos {
            return Err(Error::Parse {
                position: pos + 2,
                message: "depth-0 block must close with eos".into(),
            });
        }
        let k = S_PRODUCTIONS
            .iter()
            .position(|&pr| pr == (x, y))
            .expect("every letter pair is a production");
        counts[k] += 1;
    }
    let tail = chunks.remainder();
    if let Some(at) = tail.iter().position(|s| *s == Symbol::Eos) {
        return Err(Error::Parse {
            position: seq.len() - tail.len() + at,
            message: "eos inside a truncated block".into(),
        });
    }
    Ok(counts)
}

/// ln ∫ Π p_k^{n_k} dDir(1,…,1) over a `k`-simplex.
fn dirichlet_multinomial_log(counts: &[u64]) -> Result<f64> {
    let k = counts.len() as f64;
    let n: u64 = counts.iter().sum();
    let mut acc = log_gamma(k)? - log_gamma(k + n as f64)?;
    for &c in counts {
        acc += log_gamma(1.0 + c as f64)?;
    }
    Ok(acc)
}

/// Log-evidence of block counts under each family, `[simple, complex]`.
pub fn family_log_marginals(counts: &[u64; 4]) -> Result<[f64; 2]> {
    let simple = if counts[2] + counts[3] > 0 {
        f64::NEG_INFINITY
    } else {
        dirichlet_multinomial_log(&counts[..2])?
    };
    let complex = dirichlet_multinomial_log(counts)?;
    Ok([simple, complex])
}

/// Posterior over `[simple, complex]` for a depth-0 stream.
pub fn grammar_posterior(seq: &[Symbol], prior: &Distribution) -> Result<PosteriorReport> {
    if prior.len() != 2 {
        return Err(domain("grammar prior must cover [simple, complex]"));
    }
    let counts = block_counts(seq)?;
    posterior_from_counts(&counts, prior)
}

pub fn posterior_from_counts(counts: &[u64; 4], prior: &Distribution) -> Result<PosteriorReport> {
    let lm = family_log_marginals(counts)?;
    PosteriorReport::from_log_marginals(
        vec!["simple".into(), "complex".into()],
        lm.to_vec(),
        prior.clone(),
    )
}
