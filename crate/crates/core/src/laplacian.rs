//! Edge-weight parameterization `Θ(w) = Σ_e w_e (e_i − e_j)(e_i − e_j)ᵀ` of
//! zero-row-sum symmetric matrices, and the concave objective
//! `f(w) = log Det Θ(w) − Σ_e w_e Γ̄_e` that both the graph-constrained fit and
//! the Laplacian-constrained fit maximize.
//!
//! With `J = 𝟙𝟙ᵀ/d`, `Θ + J` is positive definite exactly when `Θ` is PSD
//! with kernel spanned by `𝟙`, `log Det Θ = log det(Θ + J)` and
//! `Θ⁺ = (Θ + J)⁻¹ − J`. All evaluations go through one Cholesky factor.

use crate::linalg::{symmetrize_in_place, Matrix};

pub(crate) struct EdgeState {
    pub log_det: f64,
    /// `Θ(w)⁺`
    pub sigma: Matrix,
}

pub(crate) fn theta_from_weights(d: usize, edges: &[(usize, usize)], w: &[f64]) -> Matrix {
    let mut theta = Matrix::zeros(d, d);
    for (&(i, j), &wij) in edges.iter().zip(w) {
        theta[(i, i)] += wij;
        theta[(j, j)] += wij;
        theta[(i, j)] -= wij;
        theta[(j, i)] -= wij;
    }
    theta
}

/// `None` when `Θ(w)` is not PSD of rank `d − 1`.
pub(crate) fn evaluate(d: usize, edges: &[(usize, usize)], w: &[f64]) -> Option<EdgeState> {
    let theta = theta_from_weights(d, edges, w);
    evaluate_theta(&theta)
}

pub(crate) fn evaluate_theta(theta: &Matrix) -> Option<EdgeState> {
    let d = theta.nrows();
    let j = Matrix::from_element(d, d, 1.0 / d as f64);
    let shifted = theta + &j;
    let chol = shifted.cholesky()?;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for k in 0..d {
        let v = l[(k, k)];
        if !(v > 0.0) {
            return None;
        }
        log_det += 2.0 * v.ln();
    }
    let mut sigma = chol.inverse() - j;
    symmetrize_in_place(&mut sigma);
    if !log_det.is_finite() {
        return None;
    }
    Some(EdgeState { log_det, sigma })
}

/// `Γ_ij = Σ_ii + Σ_jj − 2Σ_ij`
#[inline]
pub(crate) fn implied_gamma(sigma: &Matrix, i: usize, j: usize) -> f64 {
    sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)]
}

/// `(e_i − e_j)ᵀ Σ (e_k − e_l)`
#[inline]
pub(crate) fn cross(sigma: &Matrix, (i, j): (usize, usize), (k, l): (usize, usize)) -> f64 {
    sigma[(i, k)] - sigma[(i, l)] - sigma[(j, k)] + sigma[(j, l)]
}

pub(crate) fn objective(state: &EdgeState, w: &[f64], target: &[f64]) -> f64 {
    state.log_det - w.iter().zip(target).map(|(a, b)| a * b).sum::<f64>()
}

/// Gradient `Γ(w)_e − Γ̄_e`.
pub(crate) fn gradient(state: &EdgeState, edges: &[(usize, usize)], target: &[f64]) -> Vec<f64> {
    edges
        .iter()
        .zip(target)
        .map(|(&(i, j), &t)| implied_gamma(&state.sigma, i, j) - t)
        .collect()
}

/// Negated Hessian `(v_eᵀ Σ v_f)²` restricted to `active` edges (positive semidefinite).
pub(crate) fn neg_hessian(state: &EdgeState, edges: &[(usize, usize)], active: &[usize]) -> Matrix {
    let m = active.len();
    let mut h = Matrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let c = cross(&state.sigma, edges[active[a]], edges[active[b]]);
            h[(a, b)] = c * c;
            h[(b, a)] = c * c;
        }
    }
    h
}
