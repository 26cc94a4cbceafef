use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{domain, Result};

/// Allowed deviation of a probability vector's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Probability vector over a finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("distribution over an empty support"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(domain(format!("probability {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights. Fails if they sum to zero.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(domain("weights must be non-negative and finite"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(domain("weights sum to zero"));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Normalizes log-weights through [`log_sum_exp`]; `-inf` entries get mass 0.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let z = log_sum_exp(log_weights)?;
        if z == f64::NEG_INFINITY {
            return Err(domain("every log-weight is -inf"));
        }
        let probs: Vec<f64> = log_weights.iter().map(|&l| (l - z).exp()).collect();
        // exp rounding can leave the sum a few ulps off
        Self::from_weights(probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("uniform distribution over an empty support"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(domain(format!("point mass at {at} outside support of size {n}")));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.0
    }
}

/// Draw from Dir(alpha) by normalizing independent Gamma(alpha_i, 1) variates.
pub fn sample_dirichlet(rng: &mut Rng, alpha: &[f64]) -> Result<Distribution> {
    if alpha.is_empty() {
        return Err(domain("dirichlet with empty concentration vector"));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(domain("dirichlet concentrations must be positive and finite"));
    }
    loop {
        let draws: Vec<f64> = alpha.iter().map(|&a| rng.gamma(a)).collect();
        // every gamma variate underflowing to zero only happens for tiny alpha
        if draws.iter().sum::<f64>() > 0.0 {
            return Distribution::from_weights(draws);
        }
    }
}

/// KL(p ‖ q) in nats. Returns `f64::INFINITY` when p puts mass where q has none.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(domain(format!(
            "support mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pi * (pi / qi).ln();
    }
    // cancellation can produce -1e-17 for identical inputs
    Ok(kl.max(0.0))
}

/// ln Σ exp(x_i), shifted by the maximum. All `-inf` inputs give `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(domain("log_sum_exp of an empty slice"));
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + s.ln())
}

#[cfg(test)]
mod tests {
    use super::super::Rng;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::from_weights(vec![0.0, 0.0]).is_err());
        let d = Distribution::from_weights(vec![1.0, 3.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn distribution_serde_validates() {
        let d: Distribution = serde_json_like(&[0.25, 0.75]).unwrap();
        assert_eq!(d.argmax(), 1);
        assert!(serde_json_like(&[0.5, 0.7]).is_err());
    }

    fn serde_json_like(v: &[f64]) -> Result<Distribution> {
        Distribution::try_from(v.to_vec())
    }

    #[test]
    fn dirichlet_symmetric_means() {
        let mut rng = Rng::new(11, 0);
        let n = 100_000;
        let mut s2 = 0.0;
        let mut s3 = [0.0; 3];
        let mut s21 = 0.0;
        for _ in 0..n {
            s2 += sample_dirichlet(&mut rng, &[1.0, 1.0]).unwrap().probs()[0];
            let d = sample_dirichlet(&mut rng, &[1.0, 1.0, 1.0]).unwrap();
            for (acc, p) in s3.iter_mut().zip(d.probs()) {
                *acc += p;
            }
            s21 += sample_dirichlet(&mut rng, &[2.0, 1.0]).unwrap().probs()[0];
        }
        let n = n as f64;
        assert!((s2 / n - 0.5).abs() < 0.01);
        for acc in s3 {
            assert!((acc / n - 1.0 / 3.0).abs() < 0.01);
        }
        // Beta(2,1) mean = 2/3
        assert!((s21 / n - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        let mut rng = Rng::new(0, 0);
        assert!(sample_dirichlet(&mut rng, &[]).is_err());
        assert!(sample_dirichlet(&mut rng, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let a = Distribution::new(vec![1.0, 0.0]).unwrap();
        let b = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&b, &a).unwrap(), f64::INFINITY);
        let c = Distribution::uniform(3).unwrap();
        assert!(kl_divergence(&a, &c).is_err());
    }

    #[test]
    fn log_sum_exp_examples() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = log_sum_exp(&[-1000.0, -1000.0]).unwrap();
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(log_sum_exp(&[-745.0, 0.0]).unwrap().abs() < 1e-300);
        assert!(log_sum_exp(&[]).is_err());
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    fn dist_strategy(n: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero weights", |w| {
            Distribution::from_weights(w).ok()
        })
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(p in dist_strategy(4), q in dist_strategy(4)) {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            let max_gap = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if max_gap > 1e-6 {
                prop_assert!(kl > 0.0);
            }
        }

        #[test]
        fn log_sum_exp_shift_invariant(xs in prop::collection::vec(-50.0f64..50.0, 1..20), c in -500.0f64..500.0) {
            let base = log_sum_exp(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x - c).collect();
            let back = log_sum_exp(&shifted).unwrap() + c;
            prop_assert!((base - back).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }
}
