//! Dense symmetric linear algebra shared by the model code.
//!
//! Everything here works on symmetric matrices. Inputs are checked for
//! symmetry and then replaced by `(M + Mᵀ)/2` so that round-off in the
//! caller never leaks into an eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Default relative eigenvalue cutoff used to decide numerical rank.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;

/// Asymmetry accepted before an input is rejected, relative to `1 + max|M_ij|`.
const SYMMETRY_TOL: f64 = 1e-8;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl EigenResult {
    pub fn reconstruct(&self) -> Matrix {
        let q = &self.eigenvectors;
        q * Matrix::from_diagonal(&self.eigenvalues) * q.transpose()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Checks squareness and symmetry and returns the exactly symmetrized copy.
pub fn symmetrize(m: &Matrix) -> Result<Matrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + max_abs(m);
    let mut asym = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if !asym.is_finite() || asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

pub fn symmetric_eigen(m: &Matrix) -> Result<EigenResult> {
    let sym = symmetrize(m)?;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Moore–Penrose pseudo-inverse. Eigenvalues with `|λ| <= tol * max|λ|` are
/// treated as zero.
pub fn pseudo_inverse(m: &Matrix, tol: f64) -> Result<Matrix> {
    check_tol(tol)?;
    let eig = symmetric_eigen(m)?;
    let cutoff = tol * eig.spectral_radius();
    let n = m.nrows();
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff || lambda == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out.ger(1.0 / lambda, &v, &v, 1.0);
    }
    symmetrize_in_place(&mut out);
    Ok(out)
}

/// Product of the eigenvalues above `tol * max λ`.
pub fn pseudo_determinant(m: &Matrix, tol: f64) -> Result<f64> {
    Ok(log_pseudo_determinant(m, tol)?.exp())
}

/// Logarithm of [`pseudo_determinant`], computed as a sum of logs.
pub fn log_pseudo_determinant(m: &Matrix, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let eig = symmetric_eigen(m)?;
    let radius = eig.spectral_radius();
    let cutoff = tol * radius;
    if radius == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if min < -cutoff {
        return Err(Error::NotPsd(min));
    }
    let mut acc = 0.0;
    let mut rank = 0usize;
    for &lambda in eig.eigenvalues.iter() {
        if lambda > cutoff {
            acc += lambda.ln();
            rank += 1;
        }
    }
    if rank == 0 {
        return Err(Error::DegenerateMatrix);
    }
    Ok(acc)
}

/// Numerical rank with the relative cutoff `tol`.
pub fn numerical_rank(eig: &EigenResult, tol: f64) -> usize {
    let cutoff = tol * eig.spectral_radius();
    eig.eigenvalues.iter().filter(|v| v.abs() > cutoff).count()
}

/// `P M P` with `P = I − 𝟙𝟙ᵀ/d`: removes row and column means.
pub fn center_project(m: &Matrix) -> Result<Matrix> {
    let sym = symmetrize(m)?;
    let d = sym.nrows();
    if d == 0 {
        return Ok(sym);
    }
    let row_means: Vec<f64> = (0..d).map(|i| sym.row(i).sum() / d as f64).collect();
    let grand = row_means.iter().sum::<f64>() / d as f64;
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = sym[(i, j)] - row_means[i] - row_means[j] + grand;
        }
    }
    symmetrize_in_place(&mut out);
    Ok(out)
}

/// The projection `I − 𝟙𝟙ᵀ/d`.
pub fn centering_projection(d: usize) -> Matrix {
    Matrix::identity(d, d) - Matrix::from_element(d, d, 1.0 / d as f64)
}

pub(crate) fn symmetrize_in_place(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factor of a symmetric positive definite matrix, retrying once with
/// a small diagonal jitter.
pub(crate) fn cholesky_lower(m: &Matrix, jitter: f64) -> Result<Matrix> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let bumped = m + Matrix::identity(m.nrows(), m.nrows()) * (jitter * scale);
    bumped
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPsd(f64::NAN))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub(crate) fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let ch = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Argument("matrix is not positive definite".into()))?;
    let mut inv = ch.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("eigen tolerance must be positive, got {tol}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        let n = rows.len();
        Matrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn pinv_identity() {
        let p = pseudo_inverse(&Matrix::identity(3, 3), 1e-10).unwrap();
        assert_abs_diff_eq!(p, Matrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn pinv_rank_one() {
        // a·J has eigenvalue 2a on (1,-1)/sqrt(2), so (a·J)⁺ = J/(4a); with a = γ/4 that is J/γ
        let gamma = 2.0;
        let j = mat(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let p = pseudo_inverse(&(&j * (gamma / 4.0)), 1e-10).unwrap();
        assert_abs_diff_eq!(p, &j / gamma, epsilon = 1e-14);
        let q = pseudo_inverse(&(&j * 0.25), 1e-10).unwrap();
        assert_abs_diff_eq!(q, &j, epsilon = 1e-14);
    }

    #[test]
    fn pinv_zero() {
        let p = pseudo_inverse(&Matrix::zeros(2, 2), 1e-10).unwrap();
        assert_eq!(p, Matrix::zeros(2, 2));
    }

    #[test]
    fn pinv_rejects_bad_shapes() {
        assert!(matches!(
            pseudo_inverse(&Matrix::zeros(2, 3), 1e-9),
            Err(Error::Dimension(_))
        ));
        let m = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(pseudo_inverse(&m, 1e-9), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn pdet_examples() {
        let half = mat(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert_abs_diff_eq!(pseudo_determinant(&half, 1e-9).unwrap(), 1.0, epsilon = 1e-13);
        let p = centering_projection(3);
        assert_abs_diff_eq!(pseudo_determinant(&p, 1e-9).unwrap(), 1.0, epsilon = 1e-13);
        let diag = Matrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.0]));
        assert_abs_diff_eq!(pseudo_determinant(&diag, 1e-9).unwrap(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn pdet_errors() {
        assert_eq!(
            pseudo_determinant(&Matrix::zeros(3, 3), 1e-9),
            Err(Error::DegenerateMatrix)
        );
        let indefinite = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(pseudo_determinant(&indefinite, 1e-9), Err(Error::NotPsd(_))));
    }

    #[test]
    fn center_project_examples() {
        let ones = Matrix::from_element(3, 3, 1.0);
        assert_abs_diff_eq!(center_project(&ones).unwrap(), Matrix::zeros(3, 3), epsilon = 1e-15);
        let c = center_project(&Matrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(c, mat(&[&[0.5, -0.5], &[-0.5, 0.5]]), epsilon = 1e-15);
        let centered = mat(&[&[2.0, -1.0, -1.0], &[-1.0, 1.0, 0.0], &[-1.0, 0.0, 1.0]]);
        assert_abs_diff_eq!(center_project(&centered).unwrap(), centered, epsilon = 1e-15);
    }

    #[test]
    fn eigen_sorted_and_orthonormal() {
        let m = mat(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
        let eig = symmetric_eigen(&m).unwrap();
        assert!(eig.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let q = &eig.eigenvectors;
        assert_abs_diff_eq!(q.transpose() * q, Matrix::identity(3, 3), epsilon = 1e-12);
        assert_abs_diff_eq!(eig.reconstruct(), m, epsilon = 1e-12);
    }

    fn psd_strategy() -> impl Strategy<Value = Matrix> {
        (2usize..7, 0usize..4).prop_flat_map(|(n, drop)| {
            let rank = n.saturating_sub(drop).max(1);
            prop::collection::vec(-2.0f64..2.0, n * rank)
                .prop_map(move |v| {
                    let b = Matrix::from_vec(n, rank, v);
                    &b * b.transpose()
                })
        })
    }

    fn sym_strategy() -> impl Strategy<Value = Matrix> {
        (2usize..7).prop_flat_map(|n| {
            prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| {
                let a = Matrix::from_vec(n, n, v);
                (&a + a.transpose()) * 0.5
            })
        })
    }

    proptest! {
        #[test]
        fn eigen_reconstruction(m in sym_strategy()) {
            let eig = symmetric_eigen(&m).unwrap();
            let err = max_abs(&(eig.reconstruct() - &m));
            prop_assert!(err <= 1e-8 * (1.0 + max_abs(&m)));
        }

        #[test]
        fn pinv_penrose_conditions(m in psd_strategy()) {
            let p = pseudo_inverse(&m, DEFAULT_EIGEN_TOL).unwrap();
            let scale = 1.0 + max_abs(&m);
            prop_assert!(max_abs(&(&m * &p * &m - &m)) <= 1e-8 * scale * scale);
            let pscale = 1.0 + max_abs(&p);
            prop_assert!(max_abs(&(&p * &m * &p - &p)) <= 1e-8 * pscale * pscale * scale);
            prop_assert_eq!(p.clone(), p.transpose());
        }

        #[test]
        fn pinv_involution(m in psd_strategy()) {
            // well-conditioned nonzero spectrum keeps the involution inside 1e-7
            let eig = symmetric_eigen(&m).unwrap();
            let r = numerical_rank(&eig, 1e-6);
            let smallest = eig.eigenvalues[r - 1];
            prop_assume!(smallest > 1e-3 * eig.spectral_radius());
            prop_assume!(r == numerical_rank(&eig, DEFAULT_EIGEN_TOL));
            let back = pseudo_inverse(&pseudo_inverse(&m, DEFAULT_EIGEN_TOL).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
            prop_assert!(max_abs(&(back - &m)) <= 1e-7 * (1.0 + max_abs(&m)));
        }

        #[test]
        fn center_project_idempotent(m in sym_strategy()) {
            let once = center_project(&m).unwrap();
            let twice = center_project(&once).unwrap();
            prop_assert!(max_abs(&(&twice - &once)) <= 1e-10);
            for i in 0..once.nrows() {
                prop_assert!(once.row(i).sum().abs() <= 1e-10);
            }
        }

        #[test]
        fn pdet_of_pinv_is_reciprocal(m in psd_strategy()) {
            let eig = symmetric_eigen(&m).unwrap();
            let r = numerical_rank(&eig, 1e-6);
            prop_assume!(eig.eigenvalues[r - 1] > 1e-3 * eig.spectral_radius());
            prop_assume!(r == numerical_rank(&eig, DEFAULT_EIGEN_TOL));
            let d = pseudo_determinant(&m, DEFAULT_EIGEN_TOL).unwrap();
            let dinv = pseudo_determinant(&pseudo_inverse(&m, DEFAULT_EIGEN_TOL).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
            prop_assert!((d * dinv - 1.0).abs() <= 1e-7);
        }
    }
}
