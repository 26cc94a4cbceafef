use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};

/// Dense real matrix. Entries are addressed `(row, col)`.
pub type Matrix = DMatrix<f64>;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Cholesky pivots below this fraction of the Gram trace mark the Gram singular.
const PIVOT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramMode {
    /// `A Aᵀ` (rows × rows)
    Outer,
    /// `Aᵀ A` (cols × cols)
    Inner,
}

/// Moore-Penrose pseudoinverse applied to `y`.
///
/// For underdetermined systems this is the minimum-norm interpolator. Rank is
/// decided by an SVD with relative cutoff [`RANK_CUTOFF`].
pub fn pinv_apply(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != y.len() {
        return Err(domain(format!(
            "pinv_apply: matrix has {} rows but y has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(Vec::new());
    }
    if a.nrows() == 0 {
        return Ok(vec![0.0; a.ncols()]);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let y = DVector::from_column_slice(y);
    let mut out = DVector::zeros(a.ncols());
    if sigma_max == 0.0 {
        return Ok(out.as_slice().to_vec());
    }
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= RANK_CUTOFF * sigma_max {
            continue;
        }
        let coef = u.column(k).dot(&y) / sigma;
        out += v_t.row(k).transpose() * coef;
    }
    Ok(out.as_slice().to_vec())
}

/// ‖(I − A A†) y‖, the distance from `y` to the column space of `A`.
pub fn projection_residual(a: &Matrix, y: &[f64]) -> Result<f64> {
    let w = pinv_apply(a, y)?;
    let fitted = a * DVector::from_column_slice(&w);
    Ok(fitted
        .iter()
        .zip(y)
        .map(|(f, y)| (y - f).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// ln det of `A Aᵀ` or `Aᵀ A` through a Cholesky factorization.
pub fn log_det_gram(a: &Matrix, mode: GramMode) -> Result<f64> {
    let gram = match mode {
        GramMode::Outer => a * a.transpose(),
        GramMode::Inner => a.transpose() * a,
    };
    cholesky_log_det(&gram)
}

fn cholesky_log_det(g: &Matrix) -> Result<f64> {
    let n = g.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let trace = g.trace();
    let floor = PIVOT_CUTOFF * trace;
    let mut l = Matrix::zeros(n, n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut pivot = g[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot.is_nan() || pivot <= floor {
            return Err(Error::Singular(format!(
                "gram pivot {pivot:.3e} at index {j} is below {floor:.3e}"
            )));
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        log_det += 2.0 * d.ln();
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(log_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.normal())
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn pinv_identity_and_min_norm() {
        let w = pinv_apply(&Matrix::identity(2, 2), &[1.0, 2.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let w = pinv_apply(&a, &[2.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_recovers_planted_weights() {
        let mut rng = Rng::new(5, 0);
        let a = random_matrix(&mut rng, 5, 3);
        let w = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let y = &a * &w;
        let got = pinv_apply(&a, y.as_slice()).unwrap();
        for (g, t) in got.iter().zip(w.iter()) {
            assert!((g - t).abs() < 1e-8);
        }
    }

    #[test]
    fn pinv_dimension_mismatch() {
        assert!(pinv_apply(&Matrix::identity(2, 2), &[1.0]).is_err());
    }

    #[test]
    fn pinv_zeroes_rank_deficient_directions() {
        // duplicate columns: min-norm solution splits weight evenly
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let w = pinv_apply(&a, &[2.0, 4.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_det_examples() {
        assert!(log_det_gram(&Matrix::identity(3, 3), GramMode::Outer).unwrap().abs() < 1e-15);
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let v = log_det_gram(&a, GramMode::Inner).unwrap();
        assert!((v - 36f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_det_matches_singular_values() {
        let mut rng = Rng::new(6, 0);
        let a = random_matrix(&mut rng, 6, 4);
        let oracle: f64 = a
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .map(|s| (s * s).ln())
            .sum();
        let v = log_det_gram(&a, GramMode::Inner).unwrap();
        assert!((v - oracle).abs() < 1e-8);
    }

    #[test]
    fn log_det_detects_rank_deficiency() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            log_det_gram(&a, GramMode::Inner),
            Err(Error::Singular(_))
        ));
        // 3x2 has rank 2, so A Aᵀ (3x3) is singular
        let mut rng = Rng::new(1, 1);
        let b = random_matrix(&mut rng, 3, 2);
        assert!(log_det_gram(&b, GramMode::Outer).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pinv_is_min_norm_interpolator(seed in 0u64..10_000, rows in 1usize..5, extra in 1usize..4) {
            let cols = rows + extra;
            let mut rng = Rng::new(seed, 0);
            let a = random_matrix(&mut rng, rows, cols);
            let y: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
            let w = pinv_apply(&a, &y).unwrap();
            // null-space direction: project a random vector off the row space
            let z = DVector::from_fn(cols, |_, _| rng.normal());
            let zr = pinv_apply(&a, (&a * &z).as_slice()).unwrap();
            let null: Vec<f64> = z.iter().zip(&zr).map(|(a, b)| a - b).collect();
            let other: Vec<f64> = w.iter().zip(&null).map(|(a, b)| a + b).collect();
            prop_assert!(norm(&w) <= norm(&other) + 1e-9);
        }

        #[test]
        fn outer_and_inner_gram_agree_under_transpose(seed in 0u64..10_000, n in 1usize..6, extra in 0usize..4) {
            let mut rng = Rng::new(seed, 1);
            let a = random_matrix(&mut rng, n, n + extra);
            let outer = log_det_gram(&a, GramMode::Outer).unwrap();
            let inner = log_det_gram(&a.transpose(), GramMode::Inner).unwrap();
            prop_assert!((outer - inner).abs() < 1e-9);
        }
    }
}
