//! Noiseless linear regression with two nested task families: weights on the
//! first `d/2` coordinates only ("simple") or on all `d` ("complex").
//!
//! With `w ~ N(0, I)` on the active coordinates, the labels `y = A w` have a
//! Gaussian law supported on `range(A_active)`. Its density against Lebesgue
//! measure on that subspace is the marginal likelihood of a family, and the
//! posterior-weighted mix of the two least-squares solutions is the
//! Bayes-optimal regressor under square loss.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    log_det_gram, log_sum_exp, multivariate_digamma, pinv_apply, projection_residual,
    Distribution, GramMode, Matrix, Rng,
};

/// Relative projection residual above which `y` is off the family's subspace.
pub const SUBSPACE_TOLERANCE: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    /// Weights supported on the first `d/2` coordinates.
    Simple,
    Complex,
}

impl TaskFamily {
    pub fn active_dim(self, ambient_dim: usize) -> usize {
        match self {
            TaskFamily::Simple => ambient_dim / 2,
            TaskFamily::Complex => ambient_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub ambient_dim: usize,
    pub family: TaskFamily,
    /// Length `ambient_dim`; zero beyond the active coordinates.
    pub weights: Vec<f64>,
}

impl RegressionTask {
    pub fn active_dim(&self) -> usize {
        self.family.active_dim(self.ambient_dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionContext {
    /// `T × d`, one example per row.
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub query: Vec<f64>,
}

impl RegressionContext {
    pub fn ambient_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Design restricted to the first `k` columns.
    pub fn restricted_features(&self, k: usize) -> Matrix {
        self.features.columns(0, k).into_owned()
    }
}

/// Which least-squares problem to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restriction {
    FullDim,
    HalfDim,
}

impl From<TaskFamily> for Restriction {
    fn from(f: TaskFamily) -> Self {
        match f {
            TaskFamily::Simple => Restriction::HalfDim,
            TaskFamily::Complex => Restriction::FullDim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimPosterior {
    /// `[ln L_{d/2}, ln L_d]`; `-inf` when `y` is off the family's subspace.
    pub log_densities: [f64; 2],
    /// Over `[d/2, d]`.
    pub posterior: Distribution,
    pub w_bayes: Vec<f64>,
    pub w_half: Vec<f64>,
    pub w_full: Vec<f64>,
}

impl DimPosterior {
    pub fn simple_mass(&self) -> f64 {
        self.posterior.probs()[0]
    }

    pub fn complex_mass(&self) -> f64 {
        self.posterior.probs()[1]
    }
}

fn check_even(d: usize) -> Result<()> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(domain(format!("ambient dimension must be even and >= 2, got {d}")));
    }
    Ok(())
}

pub fn sample_task(rng: &mut Rng, d: usize, family: TaskFamily) -> Result<RegressionTask> {
    check_even(d)?;
    let k = family.active_dim(d);
    let weights = (0..d).map(|i| if i < k { rng.normal() } else { 0.0 }).collect();
    Ok(RegressionTask {
        ambient_dim: d,
        family,
        weights,
    })
}

/// `len` Gaussian examples labelled by the task, plus one Gaussian query.
pub fn generate_context(rng: &mut Rng, task: &RegressionTask, len: usize) -> Result<RegressionContext> {
    if len == 0 {
        return Err(domain("context needs at least one example"));
    }
    let d = task.ambient_dim;
    let mut features = Matrix::zeros(len, d);
    for t in 0..len {
        for j in 0..d {
            features[(t, j)] = rng.normal();
        }
    }
    let w = DVector::from_column_slice(&task.weights);
    let labels = (&features * &w).as_slice().to_vec();
    let query = (0..d).map(|_| rng.normal()).collect();
    Ok(RegressionContext {
        features,
        labels,
        query,
    })
}

/// Minimum-norm least squares, zero-padded to length `d` for `HalfDim`.
pub fn ls_solution(ctx: &RegressionContext, restrict: Restriction) -> Result<Vec<f64>> {
    let d = ctx.ambient_dim();
    match restrict {
        Restriction::FullDim => pinv_apply(&ctx.features, &ctx.labels),
        Restriction::HalfDim => {
            let mut w = pinv_apply(&ctx.restricted_features(d / 2), &ctx.labels)?;
            w.resize(d, 0.0);
            Ok(w)
        }
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// ln of the density of `y` under a family, or `-inf` when `y` leaves its subspace.
///
/// With `k` active columns the support of `y` has dimension `min(T, k)`:
/// - `T ≤ k`: `(2π)^{-T/2} det(A_k A_kᵀ)^{-1/2} exp(-‖w_LS‖²/2)`
/// - `T > k`: `(2π)^{-k/2} det(A_kᵀ A_k)^{-1/2} exp(-‖w_LS‖²/2)`
///
/// In the ambiguous regime `d/2 ≤ T < d` these are the usual `L_{d/2}` and `L_d`.
pub fn marginal_log_density(ctx: &RegressionContext, family: TaskFamily) -> Result<f64> {
    let d = ctx.ambient_dim();
    check_even(d)?;
    let k = family.active_dim(d);
    let a = ctx.restricted_features(k);
    let t = ctx.len();
    let y_norm = sq_norm(&ctx.labels).sqrt();
    let resid = projection_residual(&a, &ctx.labels)?;
    if y_norm > 0.0 && resid / y_norm > SUBSPACE_TOLERANCE {
        return Ok(f64::NEG_INFINITY);
    }
    let w = pinv_apply(&a, &ctx.labels)?;
    let (support_dim, log_det) = if t <= k {
        (t, log_det_gram(&a, GramMode::Outer)?)
    } else {
        (k, log_det_gram(&a, GramMode::Inner)?)
    };
    Ok(-0.5 * support_dim as f64 * LN_2PI - 0.5 * log_det - 0.5 * sq_norm(&w))
}

/// Posterior over `{d/2, d}` under a uniform prior, and the matching mixture regressor.
///
/// For `T ≥ d` both families' densities live on subspaces of different
/// dimension, so selection reduces to subspace membership: the simple family
/// takes all mass whenever `y` lies in its subspace.
pub fn dim_posterior(ctx: &RegressionContext) -> Result<DimPosterior> {
    let d = ctx.ambient_dim();
    let log_half = marginal_log_density(ctx, TaskFamily::Simple)?;
    let log_full = marginal_log_density(ctx, TaskFamily::Complex)?;
    let log_densities = [log_half, log_full];
    if log_half == f64::NEG_INFINITY && log_full == f64::NEG_INFINITY {
        return Err(Error::DegenerateEvidence(
            "labels lie outside both families' subspaces".into(),
        ));
    }
    let posterior = if ctx.len() >= d {
        let pick = if log_half.is_finite() { 0 } else { 1 };
        Distribution::point_mass(2, pick)?
    } else {
        let z = log_sum_exp(&log_densities)?;
        Distribution::from_weights(log_densities.iter().map(|l| (l - z).exp()).collect())?
    };
    let w_half = ls_solution(ctx, Restriction::HalfDim)?;
    let w_full = ls_solution(ctx, Restriction::FullDim)?;
    let (ph, pf) = (posterior.probs()[0], posterior.probs()[1]);
    let w_bayes = w_half
        .iter()
        .zip(&w_full)
        .map(|(h, f)| ph * h + pf * f)
        .collect();
    Ok(DimPosterior {
        log_densities,
        posterior,
        w_bayes,
        w_half,
        w_full,
    })
}

/// Which Gram matrix of a Gaussian design a log-determinant refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramKind {
    /// `A_d A_dᵀ` for a `T × d` design (`T × T`, Wishart with d degrees of freedom).
    FullOuter,
    /// `A_{d/2}ᵀ A_{d/2}` for the first `d/2` columns (`d/2 × d/2`, T degrees of freedom).
    HalfInner,
}

/// Analytic E[ln det] of a Wishart Gram: `ψ_p(n/2) + p ln 2` with `p` the
/// matrix size and `n` the degrees of freedom.
pub fn expected_log_det(kind: GramKind, d: usize, len: usize) -> Result<f64> {
    check_even(d)?;
    let (p, dof) = match kind {
        GramKind::FullOuter => (len, d),
        GramKind::HalfInner => (d / 2, len),
    };
    if p == 0 || dof < p {
        return Err(domain(format!(
            "{kind:?} with d={d}, T={len} is not a full-rank Wishart ({p}x{p}, {dof} dof)"
        )));
    }
    Ok(multivariate_digamma(p, dof as f64 / 2.0)? + p as f64 * 2f64.ln())
}

/// Samples ln det of the selected Gram for one fresh `len × d` Gaussian design.
pub fn sample_log_det(rng: &mut Rng, kind: GramKind, d: usize, len: usize) -> Result<f64> {
    check_even(d)?;
    let cols = match kind {
        GramKind::FullOuter => d,
        GramKind::HalfInner => d / 2,
    };
    let a = Matrix::from_fn(len, cols, |_, _| rng.normal());
    match kind {
        GramKind::FullOuter => log_det_gram(&a, GramMode::Outer),
        GramKind::HalfInner => log_det_gram(&a, GramMode::Inner),
    }
}

/// Δ_d = ln det(A_d A_dᵀ) − ln det(A_{d/2}ᵀ A_{d/2}) on one shared design.
pub fn sample_log_det_gap(rng: &mut Rng, d: usize, len: usize) -> Result<f64> {
    check_even(d)?;
    let a = Matrix::from_fn(len, d, |_, _| rng.normal());
    let half = a.columns(0, d / 2).into_owned();
    Ok(log_det_gram(&a, GramMode::Outer)? - log_det_gram(&half, GramMode::Inner)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub d: usize,
    pub len: usize,
    pub mean: f64,
    pub std: f64,
    pub std_err: f64,
    pub analytic: f64,
    /// `mean / (d ln d)`
    pub normalized: f64,
}

/// Context length for a ratio `c`, rounded to the nearest integer.
pub fn gap_context_len(d: usize, c: f64) -> Result<usize> {
    check_even(d)?;
    if !(c > 0.5 && c < 1.0) {
        return Err(domain(format!("ratio c must lie in (1/2, 1), got {c}")));
    }
    let len = (c * d as f64).round() as usize;
    if !(2 * len > d && len < d) {
        return Err(domain(format!(
            "T = round({c}·{d}) = {len} violates d/2 < T < d"
        )));
    }
    Ok(len)
}

/// Sampled Δ_d statistics next to their analytic expectation, for each `d`.
///
/// Trial `i` of dimension `d` draws from stream `(d << 32) | i` of `seed`.
pub fn log_det_gap_experiment(seed: u64, dims: &[usize], c: f64, trials: usize) -> Result<Vec<GapRow>> {
    if trials == 0 {
        return Err(domain("log-det gap experiment needs at least one trial"));
    }
    dims.iter()
        .map(|&d| {
            let len = gap_context_len(d, c)?;
            let samples = (0..trials)
                .map(|i| {
                    let mut rng = Rng::new(seed, ((d as u64) << 32) | i as u64);
                    sample_log_det_gap(&mut rng, d, len)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = if samples.len() > 1 {
                samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let analytic = expected_log_det(GramKind::FullOuter, d, len)?
                - expected_log_det(GramKind::HalfInner, d, len)?;
            let df = d as f64;
            Ok(GapRow {
                d,
                len,
                mean,
                std: var.sqrt(),
                std_err: (var / n).sqrt(),
                analytic,
                normalized: mean / (df * df.ln()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_residual(ctx: &RegressionContext, w: &[f64]) -> f64 {
        let fitted = &ctx.features * DVector::from_column_slice(w);
        fitted
            .iter()
            .zip(&ctx.labels)
            .map(|(f, y)| (f - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn simple_task_is_zero_padded() {
        let mut rng = Rng::new(1, 0);
        let t = sample_task(&mut rng, 4, TaskFamily::Simple).unwrap();
        assert_eq!(&t.weights[2..], &[0.0, 0.0]);
        assert!(sample_task(&mut rng, 5, TaskFamily::Simple).is_err());
        assert!(sample_task(&mut rng, 0, TaskFamily::Complex).is_err());
    }

    #[test]
    fn weight_norms_follow_chi_square_means() {
        let mut rng = Rng::new(2, 0);
        let n = 10_000;
        let complex: f64 = (0..n)
            .map(|_| sq_norm(&sample_task(&mut rng, 20, TaskFamily::Complex).unwrap().weights) / 20.0)
            .sum::<f64>()
            / n as f64;
        assert!((complex - 1.0).abs() < 0.05);
        let simple: f64 = (0..n)
            .map(|_| sq_norm(&sample_task(&mut rng, 20, TaskFamily::Simple).unwrap().weights))
            .sum::<f64>()
            / n as f64;
        assert!((simple - 10.0).abs() < 0.5);
    }

    #[test]
    fn labels_are_inner_products() {
        let mut rng = Rng::new(3, 0);
        let task = RegressionTask {
            ambient_dim: 4,
            family: TaskFamily::Complex,
            weights: vec![1.0, 0.0, 0.0, 0.0],
        };
        let ctx = generate_context(&mut rng, &task, 6).unwrap();
        for t in 0..6 {
            assert_eq!(ctx.labels[t], ctx.features[(t, 0)]);
        }
        let again = generate_context(&mut Rng::new(3, 0), &task, 6).unwrap();
        assert_eq!(again, ctx);
        assert!(generate_context(&mut rng, &task, 0).is_err());
    }

    #[test]
    fn gram_diagonal_moments() {
        let mut rng = Rng::new(4, 0);
        let task = sample_task(&mut rng, 100, TaskFamily::Complex).unwrap();
        let ctx = generate_context(&mut rng, &task, 50).unwrap();
        let g = &ctx.features * ctx.features.transpose() / 100.0;
        let mean_diag = g.diagonal().mean();
        assert!((mean_diag - 1.0).abs() < 0.05);
    }

    #[test]
    fn ls_recovers_simple_task_when_overdetermined() {
        let mut rng = Rng::new(5, 0);
        let task = sample_task(&mut rng, 10, TaskFamily::Simple).unwrap();
        let ctx = generate_context(&mut rng, &task, 12).unwrap();
        for r in [Restriction::FullDim, Restriction::HalfDim] {
            let w = ls_solution(&ctx, r).unwrap();
            for (a, b) in w.iter().zip(&task.weights) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ls_min_norm_single_example() {
        let ctx = RegressionContext {
            features: Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            labels: vec![2.0],
            query: vec![0.0, 0.0],
        };
        let w = ls_solution(&ctx, Restriction::FullDim).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ambiguous_regime_both_interpolate_and_norms_order() {
        for trial in 0..50 {
            let mut rng = Rng::new(6, trial);
            let task = sample_task(&mut rng, 20, TaskFamily::Simple).unwrap();
            let ctx = generate_context(&mut rng, &task, 15).unwrap();
            let y_norm = sq_norm(&ctx.labels).sqrt();
            let half = ls_solution(&ctx, Restriction::HalfDim).unwrap();
            let full = ls_solution(&ctx, Restriction::FullDim).unwrap();
            assert!(max_residual(&ctx, &half) <= 1e-8 * y_norm);
            assert!(max_residual(&ctx, &full) <= 1e-8 * y_norm);
            // the padded half solution also interpolates, so the full min-norm
            // solution can only be shorter
            assert!(sq_norm(&full).sqrt() <= sq_norm(&half).sqrt() + 1e-9);
        }
    }

    #[test]
    fn symmetric_degenerate_example() {
        let ctx = RegressionContext {
            features: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            labels: vec![3.0],
            query: vec![1.0, 1.0],
        };
        let want = -0.5 * LN_2PI - 4.5;
        let lh = marginal_log_density(&ctx, TaskFamily::Simple).unwrap();
        let lf = marginal_log_density(&ctx, TaskFamily::Complex).unwrap();
        assert!((lh - want).abs() < 1e-12);
        assert!((lf - want).abs() < 1e-12);
        assert!((want + 5.4189).abs() < 1e-4);
        let post = dim_posterior(&ctx).unwrap();
        assert!((post.simple_mass() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn density_matches_gaussian_formula_in_full_row_rank_case() {
        // T ≤ k: y ~ N(0, A Aᵀ); compare with the explicit Gaussian log-density
        let mut rng = Rng::new(7, 0);
        let task = sample_task(&mut rng, 8, TaskFamily::Complex).unwrap();
        let ctx = generate_context(&mut rng, &task, 5).unwrap();
        let cov = &ctx.features * ctx.features.transpose();
        let chol = cov.clone().cholesky().unwrap();
        let y = DVector::from_column_slice(&ctx.labels);
        let quad = y.dot(&chol.solve(&y));
        let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let oracle = -0.5 * 5.0 * LN_2PI - 0.5 * log_det - 0.5 * quad;
        let got = marginal_log_density(&ctx, TaskFamily::Complex).unwrap();
        assert!((got - oracle).abs() < 1e-8);
    }

    #[test]
    fn complex_tasks_exclude_the_half_family() {
        for trial in 0..100 {
            let mut rng = Rng::new(8, trial);
            let task = sample_task(&mut rng, 20, TaskFamily::Complex).unwrap();
            let ctx = generate_context(&mut rng, &task, 15).unwrap();
            assert_eq!(
                marginal_log_density(&ctx, TaskFamily::Simple).unwrap(),
                f64::NEG_INFINITY
            );
            let post = dim_posterior(&ctx).unwrap();
            assert_eq!(post.complex_mass(), 1.0);
            assert_eq!(post.w_bayes, post.w_full);
        }
    }

    #[test]
    fn simple_tasks_keep_both_densities_finite() {
        for trial in 0..50 {
            let mut rng = Rng::new(9, trial);
            let task = sample_task(&mut rng, 20, TaskFamily::Simple).unwrap();
            let ctx = generate_context(&mut rng, &task, 15).unwrap();
            let post = dim_posterior(&ctx).unwrap();
            assert!(post.log_densities.iter().all(|l| l.is_finite()));
            assert!(sq_norm(&post.w_full) < sq_norm(&post.w_half));
        }
    }

    #[test]
    fn recovery_when_overdetermined() {
        for trial in 0..20 {
            let mut rng = Rng::new(10, trial);
            let task = sample_task(&mut rng, 10, TaskFamily::Simple).unwrap();
            let ctx = generate_context(&mut rng, &task, 10 + trial as usize % 5).unwrap();
            let post = dim_posterior(&ctx).unwrap();
            assert_eq!(post.simple_mass(), 1.0);
            let err = post
                .w_bayes
                .iter()
                .zip(&task.weights)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-6 * sq_norm(&task.weights).sqrt());
        }
    }

    #[test]
    fn expected_log_det_special_value() {
        let v = expected_log_det(GramKind::FullOuter, 2, 2).unwrap();
        let euler = 0.577_215_664_901_532_9;
        assert!((v + 2.0 * euler).abs() < 1e-10);
        assert!((v + 1.1544).abs() < 1e-4);
        assert!(expected_log_det(GramKind::FullOuter, 4, 5).is_err());
        assert!(expected_log_det(GramKind::HalfInner, 20, 9).is_err());
    }

    #[test]
    fn expected_log_det_matches_monte_carlo() {
        for kind in [GramKind::FullOuter, GramKind::HalfInner] {
            let mut rng = Rng::new(11, kind as u64);
            let n = 2000;
            let xs: Vec<f64> = (0..n)
                .map(|_| sample_log_det(&mut rng, kind, 20, 15).unwrap())
                .collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
            let analytic = expected_log_det(kind, 20, 15).unwrap();
            assert!((mean - analytic).abs() < 3.0 * se, "{kind:?}: {mean} vs {analytic} (se {se})");
        }
    }

    #[test]
    fn gap_experiment_domain() {
        assert!(log_det_gap_experiment(0, &[2], 0.75, 10).is_err());
        assert!(log_det_gap_experiment(0, &[16], 0.75, 0).is_err());
        assert!(log_det_gap_experiment(0, &[16], 0.4, 10).is_err());
        let rows = log_det_gap_experiment(0, &[16], 0.75, 50).unwrap();
        assert_eq!(rows[0].len, 12);
    }
}
