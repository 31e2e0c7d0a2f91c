//! The Hüsler–Reiss family: variogram and precision parameterizations, the
//! exponent measure density, extremal correlations, the surrogate
//! likelihood and graph-constrained variogram completion.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::laplacian;
use crate::linalg::{
    self, center_project, log_pseudo_determinant, max_abs, numerical_rank, pseudo_inverse,
    spd_inverse, symmetric_eigen, Matrix, DEFAULT_EIGEN_TOL,
};

/// Negative eigenvalues of `P(−Γ/2)P` down to this fraction of the largest are
/// tolerated as round-off.
pub const VARIOGRAM_NEG_TOL: f64 = 1e-8;

/// Row sums and asymmetry of a precision matrix accepted up to this, relative
/// to `1 + max|Θ_ij|`.
pub const PRECISION_TOL: f64 = 1e-8;

const COMPLETION_MAX_ITER: usize = 10_000;
const COMPLETION_TOL: f64 = 1e-10;

/// Symmetric, zero-diagonal, strictly conditionally negative definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Variogram(Matrix);

/// Symmetric PSD matrix with zero row sums and rank `d − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precision(Matrix);

/// Outcome of a variogram validity check.
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramCheck {
    pub valid: bool,
    /// Smallest eigenvalue of `P(−Γ/2)P` after removing the `𝟙` direction.
    pub min_eigenvalue: f64,
    pub reason: Option<String>,
}

impl Variogram {
    pub fn new(m: Matrix) -> Result<Self> {
        let check = check_variogram(&m)?;
        if !check.valid {
            return Err(Error::InvalidVariogram(check.reason.unwrap_or_default()));
        }
        let mut m = linalg::symmetrize(&m)?;
        for i in 0..m.nrows() {
            m[(i, i)] = 0.0;
        }
        Ok(Variogram(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

impl Precision {
    pub fn new(m: Matrix) -> Result<Self> {
        let m = linalg::symmetrize(&m).map_err(|e| Error::InvalidPrecision(e.to_string()))?;
        let d = m.nrows();
        if d < 2 {
            return Err(Error::InvalidPrecision("dimension must be at least 2".into()));
        }
        let scale = 1.0 + max_abs(&m);
        for i in 0..d {
            let s = m.row(i).sum();
            if s.abs() > PRECISION_TOL * scale {
                return Err(Error::InvalidPrecision(format!("row {i} sums to {s:.3e}")));
            }
        }
        let eig = symmetric_eigen(&m)?;
        let radius = eig.spectral_radius();
        let min = eig.eigenvalues[d - 1];
        if min < -PRECISION_TOL * radius {
            return Err(Error::InvalidPrecision(format!("negative eigenvalue {min:.3e}")));
        }
        let rank = numerical_rank(&eig, DEFAULT_EIGEN_TOL);
        if rank != d - 1 {
            return Err(Error::InvalidPrecision(format!("rank {rank}, expected {}", d - 1)));
        }
        Ok(Precision(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Off-diagonal support `|Θ_ij| > rel_tol · max_{k≠l} |Θ_kl|`.
    pub fn support_graph(&self, rel_tol: f64) -> UndirectedGraph {
        support_graph(&self.0, rel_tol)
    }
}

pub(crate) fn support_graph(theta: &Matrix, rel_tol: f64) -> UndirectedGraph {
    let d = theta.nrows();
    let mut scale = 0.0_f64;
    for i in 0..d {
        for j in (i + 1)..d {
            scale = scale.max(theta[(i, j)].abs());
        }
    }
    let mut g = UndirectedGraph::new(d);
    if scale == 0.0 {
        return g;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if theta[(i, j)].abs() > rel_tol * scale {
                g.add_edge(i, j).expect("indices in range");
            }
        }
    }
    g
}

/// Validity check that reports instead of failing. Errors only on shape.
pub fn check_variogram(m: &Matrix) -> Result<VariogramCheck> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::Dimension(format!("variogram must be square, got {}x{}", d, m.ncols())));
    }
    let invalid = |reason: String| VariogramCheck {
        valid: false,
        min_eigenvalue: f64::NAN,
        reason: Some(reason),
    };
    if d < 2 {
        return Ok(invalid("dimension must be at least 2".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Ok(invalid("non-finite entries".into()));
    }
    let sym = match linalg::symmetrize(m) {
        Ok(s) => s,
        Err(e) => return Ok(invalid(e.to_string())),
    };
    let scale = 1.0 + max_abs(&sym);
    for i in 0..d {
        if sym[(i, i)].abs() > 1e-12 * scale {
            return Ok(invalid(format!("diagonal entry {i} is {}", sym[(i, i)])));
        }
        for j in (i + 1)..d {
            if !(sym[(i, j)] > 0.0) {
                return Ok(invalid(format!("entry ({i},{j}) = {} is not positive", sym[(i, j)])));
            }
        }
    }
    let eig = symmetric_eigen(&center_project(&(sym * -0.5))?)?;
    let radius = eig.spectral_radius();
    // drop the eigenvalue whose vector is closest to 𝟙
    let ones = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let kernel = (0..d)
        .max_by(|&a, &b| {
            let da = eig.eigenvectors.column(a).dot(&ones).abs();
            let db = eig.eigenvectors.column(b).dot(&ones).abs();
            da.total_cmp(&db)
        })
        .expect("d >= 2");
    let min_eigenvalue = (0..d)
        .filter(|&k| k != kernel)
        .map(|k| eig.eigenvalues[k])
        .fold(f64::INFINITY, f64::min);
    let overall_min = eig.eigenvalues[d - 1];
    let valid = overall_min >= -VARIOGRAM_NEG_TOL * radius
        && min_eigenvalue > DEFAULT_EIGEN_TOL * radius;
    Ok(VariogramCheck {
        valid,
        min_eigenvalue,
        reason: (!valid).then(|| {
            format!("not strictly conditionally negative definite (eigenvalue {min_eigenvalue:.3e} on the complement of 1)")
        }),
    })
}

/// `Θ = (P(−Γ/2)P)⁺`
pub fn gamma_to_theta(gamma: &Variogram) -> Result<Precision> {
    let centered = center_project(&(gamma.matrix() * -0.5))?;
    let theta = pseudo_inverse(&centered, DEFAULT_EIGEN_TOL)?;
    Precision::new(theta)
}

/// Inverse of [`gamma_to_theta`]: `Γ_ij = Σ_ii + Σ_jj − 2Σ_ij` with `Σ = Θ⁺`.
pub fn theta_to_gamma(theta: &Precision) -> Result<Variogram> {
    let sigma = pseudo_inverse(theta.matrix(), DEFAULT_EIGEN_TOL)?;
    Variogram::new(sigma_to_gamma(&sigma))
}

/// `Γ_ij = Σ_ii + Σ_jj − 2Σ_ij` for any symmetric `Σ`.
pub fn sigma_to_gamma(sigma: &Matrix) -> Matrix {
    let d = sigma.nrows();
    Matrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)]
        }
    })
}

/// Covariance `Σ⁽ᵐ⁾_ij = (Γ_im + Γ_jm − Γ_ij)/2` of the log-increments rooted
/// at `m`, indexed by the remaining nodes in increasing order.
pub fn gamma_to_sigma_m(gamma: &Variogram, m: usize) -> Result<Matrix> {
    let d = gamma.dim();
    if m >= d {
        return Err(Error::Argument(format!("root {m} out of range for dimension {d}")));
    }
    Ok(sigma_m_unchecked(gamma.matrix(), m))
}

pub(crate) fn sigma_m_unchecked(g: &Matrix, m: usize) -> Matrix {
    let idx: Vec<usize> = (0..g.nrows()).filter(|&i| i != m).collect();
    let k = idx.len();
    Matrix::from_fn(k, k, |a, b| {
        let (i, j) = (idx[a], idx[b]);
        0.5 * (g[(i, m)] + g[(j, m)] - g[(i, j)])
    })
}

/// Rebuilds the full variogram from a rooted covariance: `Γ_im = Σ_ii`,
/// `Γ_ij = Σ_ii + Σ_jj − 2Σ_ij`.
pub fn sigma_m_to_gamma(sigma_m: &Matrix, m: usize) -> Result<Matrix> {
    let k = sigma_m.nrows();
    if k != sigma_m.ncols() || m > k {
        return Err(Error::Dimension("rooted covariance shape".into()));
    }
    let d = k + 1;
    let idx: Vec<usize> = (0..d).filter(|&i| i != m).collect();
    let mut g = Matrix::zeros(d, d);
    for a in 0..k {
        g[(idx[a], m)] = sigma_m[(a, a)];
        g[(m, idx[a])] = sigma_m[(a, a)];
        for b in (a + 1)..k {
            let v = sigma_m[(a, a)] + sigma_m[(b, b)] - 2.0 * sigma_m[(a, b)];
            g[(idx[a], idx[b])] = v;
            g[(idx[b], idx[a])] = v;
        }
    }
    Ok(g)
}

/// Bivariate extremal correlations `χ_ij = 2 − 2Φ(√Γ_ij / 2)`.
pub fn hr_chi(gamma: &Variogram) -> Matrix {
    let g = gamma.matrix();
    let d = g.nrows();
    Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { chi_from_gamma(g[(i, j)]) })
}

/// `2 − 2Φ(√γ/2) = erfc(√γ / (2√2))`
pub fn chi_from_gamma(gamma: f64) -> f64 {
    libm::erfc(gamma.max(0.0).sqrt() / (2.0 * std::f64::consts::SQRT_2))
}

/// Exponent measure density of a Hüsler–Reiss model,
/// `λ(y) = c ∏ y_i^{−1−1/d} exp{−½ (log y − μ)ᵀ Θ (log y − μ)}`
/// with `μ = P(−Γ/2)𝟙 / d`. The constant `c` makes `∫_{y_m > 1} λ = 1`.
#[derive(Debug, Clone)]
pub struct HrDensity {
    theta: Matrix,
    mu: DVector<f64>,
    log_const: f64,
}

impl HrDensity {
    pub fn new(gamma: &Variogram) -> Result<Self> {
        let d = gamma.dim();
        let theta = gamma_to_theta(gamma)?.into_matrix();
        // P(−Γ/2)𝟙 / d, projected on one side only
        let row_means = gamma.matrix() * DVector::from_element(d, -0.5 / d as f64);
        let mu = linalg::centering_projection(d) * row_means;
        let mut density = HrDensity {
            theta,
            mu,
            log_const: 0.0,
        };
        // pin the constant against the rooted Gaussian form at y = 𝟙, where
        // the normalization over {y_1 > 1} holds by construction
        let ones = DVector::from_element(d, 1.0);
        let target = log_density_rooted(gamma.matrix(), 0, &ones)?;
        density.log_const = target - density.log_kernel(&ones);
        Ok(density)
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    fn log_kernel(&self, y: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let logs = y.map(f64::ln);
        let centered = &logs - &self.mu;
        let quad = centered.dot(&(&self.theta * &centered));
        -(1.0 + 1.0 / d) * logs.sum() - 0.5 * quad
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!("expected {} coordinates", self.dim())));
        }
        if let Some(bad) = y.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("coordinate {bad}")));
        }
        Ok(self.log_const + self.log_kernel(&DVector::from_column_slice(y)))
    }

    pub fn density(&self, y: &[f64]) -> Result<f64> {
        self.log_density(y).map(f64::exp)
    }
}

/// One-shot evaluation of the Hüsler–Reiss exponent measure density.
pub fn exponent_density(gamma: &Variogram, y: &[f64]) -> Result<f64> {
    HrDensity::new(gamma)?.density(y)
}

/// `log λ(y) = −2 log y_m − Σ_{i≠m} log y_i + log φ(log(y_i/y_m) + Γ_im/2; Σ⁽ᵐ⁾)`
pub(crate) fn log_density_rooted(g: &Matrix, m: usize, y: &DVector<f64>) -> Result<f64> {
    let d = g.nrows();
    let sigma = sigma_m_unchecked(g, m);
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidVariogram("rooted covariance not positive definite".into()))?;
    let idx: Vec<usize> = (0..d).filter(|&i| i != m).collect();
    let x = DVector::from_iterator(d - 1, idx.iter().map(|&i| (y[i] / y[m]).ln() + 0.5 * g[(i, m)]));
    let z = chol.l().solve_lower_triangular(&x).expect("nonsingular factor");
    let log_det: f64 = (0..d - 1).map(|k| 2.0 * chol.l()[(k, k)].ln()).sum();
    let k = (d - 1) as f64;
    let log_phi = -0.5 * z.norm_squared() - 0.5 * log_det - 0.5 * k * (2.0 * std::f64::consts::PI).ln();
    let log_prefactor = -2.0 * y[m].ln() - idx.iter().map(|&i| y[i].ln()).sum::<f64>();
    Ok(log_prefactor + log_phi)
}

/// `ℓ(Θ; Γ̄) = log Det Θ + ½ Σ_ij Θ_ij Γ̄_ij`
pub fn surrogate_loglik(theta: &Precision, gamma_bar: &Matrix) -> Result<f64> {
    let t = theta.matrix();
    if gamma_bar.shape() != t.shape() {
        return Err(Error::Dimension("surrogate likelihood operands differ in shape".into()));
    }
    let log_det = log_pseudo_determinant(t, DEFAULT_EIGEN_TOL)?;
    let trace: f64 = t.iter().zip(gamma_bar.iter()).map(|(a, b)| a * b).sum();
    Ok(log_det + 0.5 * trace)
}

/// Variogram entries known on the edges of a graph; unknown entries are NaN.
#[derive(Debug, Clone)]
pub struct PartialVariogram {
    graph: UndirectedGraph,
    values: Matrix,
}

impl PartialVariogram {
    /// Takes the edge entries of `values`; other off-diagonal entries are
    /// ignored and may be NaN.
    pub fn new(graph: UndirectedGraph, values: &Matrix) -> Result<Self> {
        let d = graph.num_nodes();
        if values.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "partial matrix is {}x{}, graph has {d} nodes",
                values.nrows(),
                values.ncols()
            )));
        }
        let mut stored = Matrix::from_element(d, d, f64::NAN);
        for i in 0..d {
            stored[(i, i)] = 0.0;
        }
        for (i, j) in graph.edges() {
            let (a, b) = (values[(i, j)], values[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Argument(format!("missing value on edge ({i},{j})")));
            }
            if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                return Err(Error::NotSymmetric((a - b).abs()));
            }
            stored[(i, j)] = a;
            stored[(j, i)] = a;
        }
        Ok(PartialVariogram { graph, values: stored })
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[(i, j)];
        v.is_finite().then_some(v)
    }

    /// Known entries, NaN elsewhere.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    fn check_cliques(&self) -> Result<()> {
        for clique in self.graph.cliques() {
            if clique.len() < 2 {
                continue;
            }
            let sub = Matrix::from_fn(clique.len(), clique.len(), |a, b| self.values[(clique[a], clique[b])]);
            let check = check_variogram(&sub)?;
            if !check.valid {
                let labels: Vec<String> = clique.iter().map(|v| (v + 1).to_string()).collect();
                return Err(Error::InvalidVariogram(format!(
                    "clique {{{}}}: {}",
                    labels.join(","),
                    check.reason.unwrap_or_default()
                )));
            }
        }
        Ok(())
    }
}

/// Graph, completed variogram and precision of a fitted model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub graph: UndirectedGraph,
    pub gamma: Variogram,
    pub theta: Precision,
    /// Threshold probability used to estimate the input, if any.
    pub threshold: Option<f64>,
    pub method: String,
    pub penalty: Option<f64>,
}

impl FittedModel {
    pub fn from_gamma(graph: UndirectedGraph, gamma: Variogram, method: impl Into<String>) -> Result<Self> {
        if graph.num_nodes() != gamma.dim() {
            return Err(Error::Dimension("graph and variogram sizes differ".into()));
        }
        let theta = gamma_to_theta(&gamma)?;
        Ok(FittedModel {
            graph,
            gamma,
            theta,
            threshold: None,
            method: method.into(),
            penalty: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn with_threshold(mut self, p: f64) -> Self {
        self.threshold = Some(p);
        self
    }

    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = Some(penalty);
        self
    }

    /// Largest `|Θ_ij|` over non-edges.
    pub fn max_non_edge_theta(&self) -> f64 {
        let t = self.theta.matrix();
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                if !self.graph.has_edge(i, j) {
                    worst = worst.max(t[(i, j)].abs());
                }
            }
        }
        worst
    }
}

impl fmt::Display for FittedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} model on {} nodes with {} edges",
            self.method,
            self.dim(),
            self.graph.num_edges()
        )
    }
}

/// Unique variogram matching the known entries on edges whose precision
/// vanishes off the graph.
///
/// Decomposable graphs are filled node by node along a maximum cardinality
/// search; other graphs are solved by Newton's method on the edge weights of
/// `Θ`, which needs a valid completion to exist.
pub fn complete_gamma(pv: &PartialVariogram) -> Result<FittedModel> {
    let gamma = complete_gamma_matrix(pv)?;
    FittedModel::from_gamma(pv.graph.clone(), gamma, "completion")
}

fn complete_gamma_matrix(pv: &PartialVariogram) -> Result<Variogram> {
    if pv.dim() < 2 {
        return Err(Error::Argument("completion needs at least 2 nodes".into()));
    }
    if !pv.graph.is_connected() {
        return Err(Error::Disconnected);
    }
    pv.check_cliques()?;
    if pv.graph.is_decomposable().decomposable {
        complete_decomposable(pv, 0)
    } else {
        complete_general(pv)
    }
}

/// Decomposable completion with the node visit order of a maximum
/// cardinality search started at `start`.
pub fn complete_decomposable(pv: &PartialVariogram, start: usize) -> Result<Variogram> {
    let g = &pv.graph;
    let d = g.num_nodes();
    if start >= d {
        return Err(Error::Argument(format!("start node {start} out of range")));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let dec = g.decomposability_from(start);
    if !dec.decomposable {
        return Err(Error::Structure("graph is not decomposable".into()));
    }
    let mut visit = dec.elimination_order;
    visit.reverse();

    let mut gm = pv.values.clone();
    let mut placed: Vec<usize> = Vec::with_capacity(d);
    for &v in &visit {
        // earlier neighbours form a clique separating v from the rest
        let sep: Vec<usize> = placed.iter().copied().filter(|&u| g.has_edge(u, v)).collect();
        if !placed.is_empty() {
            let root = sep[0];
            let rest: Vec<usize> = sep[1..].to_vec();
            let others: Vec<usize> = placed.iter().copied().filter(|u| !sep.contains(u)).collect();
            if !others.is_empty() {
                let cov = |a: usize, b: usize| 0.5 * (gm[(a, root)] + gm[(b, root)] - gm[(a, b)]);
                let coef = if rest.is_empty() {
                    DVector::zeros(0)
                } else {
                    let s_rr = Matrix::from_fn(rest.len(), rest.len(), |a, b| cov(rest[a], rest[b]));
                    let s_rv = DVector::from_iterator(rest.len(), rest.iter().map(|&r| cov(r, v)));
                    spd_inverse(&s_rr)? * s_rv
                };
                let filled: Vec<(usize, f64)> = others
                    .iter()
                    .map(|&u| {
                        let s_vu: f64 = rest.iter().zip(coef.iter()).map(|(&r, c)| c * cov(r, u)).sum();
                        (u, gm[(v, root)] + gm[(u, root)] - 2.0 * s_vu)
                    })
                    .collect();
                for (u, value) in filled {
                    gm[(v, u)] = value;
                    gm[(u, v)] = value;
                }
            }
        }
        placed.push(v);
    }
    Variogram::new(gm)
}

/// Newton solve of the completion problem on any connected graph; used
/// directly for non-decomposable graphs.
pub fn complete_general(pv: &PartialVariogram) -> Result<Variogram> {
    if !pv.graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let d = pv.dim();
    let edges = pv.graph.edges();
    let target: Vec<f64> = edges.iter().map(|&(i, j)| pv.values[(i, j)]).collect();
    let scale = 1.0 + target.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut w: Vec<f64> = target.iter().map(|t| 1.0 / t).collect();
    let mut state = laplacian::evaluate(d, &edges, &w)
        .ok_or_else(|| Error::InvalidVariogram("initial weights are not a valid precision".into()))?;
    let all: Vec<usize> = (0..edges.len()).collect();
    let mut residual = f64::INFINITY;
    for iter in 0..COMPLETION_MAX_ITER {
        let grad = laplacian::gradient(&state, &edges, &target);
        residual = grad.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if residual <= COMPLETION_TOL * scale {
            let gamma = sigma_to_gamma(&state.sigma);
            return Variogram::new(gamma);
        }
        let h = laplacian::neg_hessian(&state, &edges, &all);
        let step = solve_spd(&h, &DVector::from_vec(grad.clone()))?;
        let slope: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let f0 = laplacian::objective(&state, &w, &target);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-14 {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Some(next) = laplacian::evaluate(d, &edges, &trial) {
                let f1 = laplacian::objective(&next, &trial, &target);
                if f1 >= f0 + 1e-4 * t * slope || (f1 - f0).abs() <= 1e-15 * f0.abs().max(1.0) {
                    w = trial;
                    state = next;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            log::debug!("completion line search stalled at iteration {iter}");
            break;
        }
    }
    if residual <= 1e-8 * scale {
        return Variogram::new(sigma_to_gamma(&state.sigma));
    }
    Err(Error::Convergence {
        method: "graph completion",
        iterations: COMPLETION_MAX_ITER,
        residual,
    })
}

pub(crate) fn solve_spd(h: &Matrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    let n = h.nrows();
    let ridge = 1e-12 * (0..n).map(|i| h[(i, i)]).fold(1.0, f64::max);
    let bumped = h + Matrix::identity(n, n) * ridge;
    bumped
        .cholesky()
        .map(|ch| ch.solve(rhs))
        .ok_or_else(|| Error::Convergence {
            method: "newton system",
            iterations: 0,
            residual: f64::NAN,
        })
}

/// Path-sum completion for trees and block graphs: every non-edge entry is
/// the sum of known entries along the unique shortest path.
pub fn complete_tree_blockgraph(pv: &PartialVariogram) -> Result<Variogram> {
    let g = &pv.graph;
    if !g.is_block_graph() {
        return Err(Error::Structure("graph is neither a tree nor a block graph".into()));
    }
    pv.check_cliques()?;
    let d = g.num_nodes();
    let mut out = pv.values.clone();
    for i in 0..d {
        for j in (i + 1)..d {
            if g.has_edge(i, j) {
                continue;
            }
            let path = g.shortest_path(i, j).ok_or(Error::Disconnected)?;
            let total: f64 = path.windows(2).map(|w| pv.values[(w[0], w[1])]).sum();
            out[(i, j)] = total;
            out[(j, i)] = total;
        }
    }
    Variogram::new(out)
}

/// Outcome of the triangle-inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCheck {
    pub holds: bool,
    /// Sorted triples `(i, j, k)` with at least one violated inequality.
    pub violations: Vec<(usize, usize, usize)>,
}

/// Checks `Γ_ij ≤ Γ_ik + Γ_jk` for every triple, with slack
/// `1e−10 · max(1, max|Γ|)`.
pub fn check_metric_property(gamma: &Matrix) -> MetricCheck {
    let d = gamma.nrows();
    let slack = 1e-10 * max_abs(gamma).max(1.0);
    let mut violations = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            for k in (j + 1)..d {
                let (ij, ik, jk) = (gamma[(i, j)], gamma[(i, k)], gamma[(j, k)]);
                if ij > ik + jk + slack || ik > ij + jk + slack || jk > ij + ik + slack {
                    violations.push((i, j, k));
                }
            }
        }
    }
    MetricCheck {
        holds: violations.is_empty(),
        violations,
    }
}
