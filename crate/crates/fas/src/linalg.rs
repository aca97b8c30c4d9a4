//! Dense numerical substrate: pseudo-inverse, diagonal Gaussian sampling,
//! and small subspace utilities.
//!
//! Matrices are `nalgebra` dense matrices of `f64`. Values are immutable
//! after construction and safe to share across threads; random draws go
//! through an owned [`RngStream`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative singular-value cutoff for [`pseudo_inverse`].
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse via singular value decomposition.
///
/// Singular values below `tol * sigma_max` are treated as zero, so the
/// routine is rank-revealing and handles rank-deficient input.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("pseudo_inverse input"));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = tol * sigma_max;
    // A# = V S# U^T with S#_ii = 1/s_i for s_i above the cutoff.
    let mut s_inv = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            s_inv[i] = 1.0 / s;
        }
    }
    let mut vs = v_t.transpose();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        col *= s_inv[j];
    }
    Ok(vs * u.transpose())
}

/// Independent zero-mean normal draws with the given per-component variances.
/// A zero variance yields exactly 0.
pub fn sample_gaussian_diag(variances: &[f64], rng: &mut RngStream) -> Result<Vector> {
    for &v in variances {
        if !v.is_finite() {
            return Err(Error::NonFinite("sample_gaussian_diag variances"));
        }
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("negative variance {v}")));
        }
    }
    Ok(DVector::from_iterator(
        variances.len(),
        variances.iter().map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                v.sqrt() * rng.normal()
            }
        }),
    ))
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
///
/// Computed from the singular values of `Qa^T Qb` after orthonormalizing both
/// bases; the smallest singular value is the cosine of the largest angle.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    if qa.ncols() != qb.ncols() {
        return Err(Error::InvalidInput(format!(
            "subspace dimensions differ: {} vs {}",
            qa.ncols(),
            qb.ncols()
        )));
    }
    let m = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let c = svd.singular_values.min().clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// Orthonormal basis for the column span (columns of U for nonzero singular
/// values).
pub fn orthonormal_basis(a: &Matrix) -> Result<Matrix> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let cutoff = DEFAULT_PINV_TOL * svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    if cols.is_empty() {
        return Err(Error::InvalidInput("zero matrix has no column span".into()));
    }
    Ok(u.select_columns(&cols))
}

/// Max-norm of the entries of a matrix.
pub fn max_norm(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    /// Max-norm residuals of the four Moore-Penrose conditions.
    fn penrose_residuals(a: &Matrix, p: &Matrix) -> [f64; 4] {
        let apa = a * p * a;
        let pap = p * a * p;
        let ap = a * p;
        let pa = p * a;
        [
            max_norm(&(apa - a)),
            max_norm(&(pap - p)),
            max_norm(&(ap.transpose() - ap)),
            max_norm(&(pa.transpose() - pa)),
        ]
    }

    #[test]
    fn identity_is_self_inverse() {
        let id = Matrix::identity(3, 3);
        let p = pseudo_inverse(&id, DEFAULT_PINV_TOL).unwrap();
        assert!(max_norm(&(p - id)) < 1e-12);
    }

    #[test]
    fn column_vector_pinv() {
        let a = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = pseudo_inverse(&a, DEFAULT_PINV_TOL).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn penrose_conditions_random_6x4() {
        let mut rng = RngStream::from_seed(3);
        let a = random_matrix(6, 4, &mut rng);
        let p = pseudo_inverse(&a, DEFAULT_PINV_TOL).unwrap();
        for r in penrose_residuals(&a, &p) {
            assert!(r < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn penrose_conditions_rank_deficient() {
        let mut rng = RngStream::from_seed(4);
        // 5x3 matrix of rank 2.
        let b = random_matrix(5, 2, &mut rng);
        let c = random_matrix(2, 3, &mut rng);
        let a = b * c;
        let p = pseudo_inverse(&a, DEFAULT_PINV_TOL).unwrap();
        for r in penrose_residuals(&a, &p) {
            assert!(r < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn invertible_matches_inverse() {
        let mut rng = RngStream::from_seed(5);
        let a = random_matrix(4, 4, &mut rng);
        let p = pseudo_inverse(&a, DEFAULT_PINV_TOL).unwrap();
        let inv = a.clone().try_inverse().unwrap();
        let scale = max_norm(&inv);
        assert!(max_norm(&(p - inv)) / scale < 1e-9);
    }

    #[test]
    fn pinv_is_involutive_on_full_rank() {
        let mut rng = RngStream::from_seed(6);
        for _ in 0..5 {
            let a = random_matrix(5, 3, &mut rng);
            let p = pseudo_inverse(&a, DEFAULT_PINV_TOL).unwrap();
            let pp = pseudo_inverse(&p, DEFAULT_PINV_TOL).unwrap();
            assert!(max_norm(&(pp - a.clone())) / max_norm(&a) < 1e-8);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let a = Matrix::from_column_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(
            pseudo_inverse(&a, DEFAULT_PINV_TOL),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn gaussian_diag_zero_variances() {
        let mut rng = RngStream::from_seed(1);
        let v = sample_gaussian_diag(&[0.0; 4], &mut rng).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_diag_negative_variance_rejected() {
        let mut rng = RngStream::from_seed(1);
        assert!(sample_gaussian_diag(&[1.0, -0.5], &mut rng).is_err());
    }

    #[test]
    fn gaussian_diag_moments() {
        let mut rng = RngStream::from_seed(8);
        let n = 4;
        let draws = 250_000;
        let mut sum = vec![0.0; n];
        let mut sumsq = vec![0.0; n];
        for _ in 0..draws {
            let x = sample_gaussian_diag(&[1.0; 4], &mut rng).unwrap();
            for i in 0..n {
                sum[i] += x[i];
                sumsq[i] += x[i] * x[i];
            }
        }
        for i in 0..n {
            let mean = sum[i] / draws as f64;
            let var = sumsq[i] / draws as f64 - mean * mean;
            assert!(mean.abs() < 0.01, "mean {mean}");
            assert!((var - 1.0).abs() < 0.02, "var {var}");
        }
    }

    #[test]
    fn gaussian_diag_deterministic() {
        let mut a = RngStream::new(9, 3);
        let mut b = RngStream::new(9, 3);
        let x = sample_gaussian_diag(&[1.0, 2.0, 0.5], &mut a).unwrap();
        let y = sample_gaussian_diag(&[1.0, 2.0, 0.5], &mut b).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn principal_angle_of_identical_spans_is_zero() {
        let mut rng = RngStream::from_seed(11);
        let a = random_matrix(5, 2, &mut rng);
        // Same span, different basis.
        let mix = Matrix::from_column_slice(2, 2, &[1.0, 0.3, -0.2, 2.0]);
        let b = &a * mix;
        assert!(max_principal_angle(&a, &b).unwrap() < 1e-8);
    }

    #[test]
    fn principal_angle_orthogonal_spans() {
        let a = Matrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let b = Matrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        let ang = max_principal_angle(&a, &b).unwrap();
        assert!((ang - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
