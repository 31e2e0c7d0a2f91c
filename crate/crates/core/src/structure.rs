//! Structure learning: extremal minimum spanning trees, majority-vote
//! neighbourhood selection (eglearn), the Laplacian-constrained surrogate
//! MLE and the shifted graphical lasso.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{emp_chi, emp_vario_joint, DataMatrix, EstimatorConfig};
use crate::graph::{minimum_spanning_tree, UndirectedGraph, WeightedEdge};
use crate::hr::{sigma_to_gamma, support_graph, FittedModel, Precision, Variogram};
use crate::laplacian;
use crate::linalg::{center_project, log_pseudo_determinant, symmetric_eigen, symmetrize, Matrix, DEFAULT_EIGEN_TOL};

/// Off-diagonal entries at most this fraction of the largest one count as zero.
pub const SUPPORT_TOL: f64 = 1e-6;

const LASSO_GAP_TOL: f64 = 1e-7;
const LASSO_MAX_SWEEPS: usize = 10_000;

const EMTP2_KKT_TOL: f64 = 1e-8;
const EMTP2_MAX_ITER: usize = 10_000;
const QP_MAX_SWEEPS: usize = 5_000;

const SHIFT_MAX_ITER: usize = 100_000;
const SHIFT_EPS_ABS: f64 = 1e-10;
const SHIFT_EPS_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `ρ_ij = Γ̂_ij`
    Variogram,
    /// `ρ_ij = −log χ̂_ij`
    Chi,
}

/// A learned graph with per-edge scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    pub graph: UndirectedGraph,
    /// Sorted by edge; tree weight for EMST, vote count for eglearn,
    /// `|Θ̂_ij|` for the likelihood-based methods.
    pub scores: Vec<((usize, usize), f64)>,
    pub penalty: Option<f64>,
    pub connected: bool,
}

impl LearnResult {
    fn new(graph: UndirectedGraph, scores: Vec<((usize, usize), f64)>, penalty: Option<f64>) -> Self {
        let connected = graph.is_connected();
        LearnResult {
            graph,
            scores,
            penalty,
            connected,
        }
    }
}

/// Ascending nonnegative penalty values.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGrid(Vec<f64>);

impl PenaltyGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("penalty grid is empty".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("penalties must be finite and nonnegative".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(PenaltyGrid(values))
    }

    /// `n` log-spaced values from `lo` to `hi`.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo) || n == 0 {
            return Err(Error::Config(format!("bad log grid [{lo}, {hi}] x {n}")));
        }
        if n == 1 {
            return PenaltyGrid::new(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        PenaltyGrid::new((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Minimum spanning tree under empirical variogram or `−log χ̂` weights.
pub fn emst(x: &DataMatrix, cfg: &EstimatorConfig, kind: WeightKind) -> Result<LearnResult> {
    let weights = match kind {
        WeightKind::Variogram => emp_vario_joint(x, cfg)?,
        WeightKind::Chi => emp_chi(x, cfg)?.map(|c| if c > 0.0 { -c.ln() } else { f64::INFINITY }),
    };
    emst_from_weights(&weights)
}

/// Minimum spanning tree of the complete graph weighted by a symmetric matrix.
pub fn emst_from_weights(weights: &Matrix) -> Result<LearnResult> {
    let d = weights.nrows();
    if d != weights.ncols() || d == 0 {
        return Err(Error::Dimension("weight matrix must be square".into()));
    }
    let mut edges = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            // −log χ̂ can round to a tiny negative for χ̂ = 1
            edges.push(WeightedEdge {
                i,
                j,
                weight: weights[(i, j)].max(0.0),
            });
        }
    }
    let tree = minimum_spanning_tree(&edges, d)?;
    let scores = tree.edges().into_iter().map(|(i, j)| ((i, j), weights[(i, j)])).collect();
    Ok(LearnResult::new(tree, scores, None))
}

/// Gram matrix of the standardized log-increments for one root.
fn root_gram(logs: &Matrix, rows: &[usize], m: usize) -> Matrix {
    let d = logs.ncols();
    let others: Vec<usize> = (0..d).filter(|&i| i != m).collect();
    let k = rows.len() as f64;
    let mut cols: Vec<Vec<f64>> = others
        .iter()
        .map(|&i| rows.iter().map(|&r| logs[(r, i)] - logs[(r, m)]).collect())
        .collect();
    for c in &mut cols {
        let mean = c.iter().sum::<f64>() / k;
        c.iter_mut().for_each(|v| *v -= mean);
        let sd = (c.iter().map(|v| v * v).sum::<f64>() / k).sqrt();
        if sd > 0.0 {
            c.iter_mut().for_each(|v| *v /= sd);
        }
    }
    let p = others.len();
    let mut s = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum::<f64>() / k;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Lasso `½βᵀAβ − bᵀβ + ρ‖β‖₁` in Gram form, with `A = S_{−i,−i}` and
/// `b = S_{−i,i}`, by cyclic coordinate descent with a duality-gap stop.
/// Returns the coefficients and whether the tolerance was met.
fn gram_lasso(s: &Matrix, i: usize, rho: f64, beta: &mut [f64]) -> bool {
    let p = s.nrows();
    let idx: Vec<usize> = (0..p).filter(|&j| j != i).collect();
    let syy = s[(i, i)];
    let scale = syy.max(f64::MIN_POSITIVE);
    for _ in 0..LASSO_MAX_SWEEPS {
        for (a, &j) in idx.iter().enumerate() {
            let ajj = s[(j, j)];
            if ajj <= 0.0 {
                beta[a] = 0.0;
                continue;
            }
            let mut r = s[(j, i)];
            for (c, &l) in idx.iter().enumerate() {
                if c != a {
                    r -= s[(j, l)] * beta[c];
                }
            }
            beta[a] = soft(r, rho) / ajj;
        }
        // g = b − Aβ is Xᵀr/k
        let mut bt = 0.0;
        let mut quad = 0.0;
        let mut dual_norm = 0.0_f64;
        for (a, &j) in idx.iter().enumerate() {
            let aj: f64 = idx.iter().zip(beta.iter()).map(|(&l, bl)| s[(j, l)] * bl).sum();
            bt += s[(j, i)] * beta[a];
            quad += beta[a] * aj;
            dual_norm = dual_norm.max((s[(j, i)] - aj).abs());
        }
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let rr = (syy - 2.0 * bt + quad).max(0.0);
        let converged = if rho > 0.0 {
            let c = if dual_norm > 0.0 { (rho / dual_norm).min(1.0) } else { 1.0 };
            let gap = 0.5 * rr * (1.0 + c * c) + rho * l1 - c * (syy - bt);
            gap <= LASSO_GAP_TOL * scale
        } else {
            dual_norm <= LASSO_GAP_TOL * scale
        };
        if converged {
            return true;
        }
    }
    false
}

#[inline]
fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Per-root selection matrices (over all `d` nodes) along a penalty grid.
fn root_selections(s: &Matrix, m: usize, d: usize, grid: &[f64]) -> (Vec<Vec<Vec<bool>>>, bool) {
    let p = d - 1;
    let others: Vec<usize> = (0..d).filter(|&i| i != m).collect();
    let mut warm: Vec<Vec<f64>> = vec![vec![0.0; p.saturating_sub(1)]; p];
    let mut all_ok = true;
    let mut out = Vec::with_capacity(grid.len());
    // descending penalties so warm starts move from sparse to dense
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.reverse();
    let mut by_grid = vec![Vec::new(); grid.len()];
    for g in order {
        let mut sel = vec![vec![false; d]; d];
        for a in 0..p {
            all_ok &= gram_lasso(s, a, grid[g], &mut warm[a]);
            let idx: Vec<usize> = (0..p).filter(|&j| j != a).collect();
            for (c, &b) in idx.iter().enumerate() {
                if warm[a][c] != 0.0 {
                    let (u, v) = (others[a], others[b]);
                    sel[u][v] = true;
                    sel[v][u] = true;
                }
            }
        }
        by_grid[g] = sel;
    }
    out.extend(by_grid);
    (out, all_ok)
}

/// eglearn at a single penalty.
pub fn eglearn(x: &DataMatrix, cfg: &EstimatorConfig, rho: f64) -> Result<LearnResult> {
    let grid = PenaltyGrid::new(vec![rho])?;
    Ok(eglearn_path(x, cfg, &grid)?.remove(0))
}

/// eglearn along a penalty grid, one result per grid value in ascending
/// order. Within a root an edge is selected if either endpoint's regression
/// picks the other; across roots it needs a strict majority of the `d − 2`
/// roots distinct from both endpoints.
pub fn eglearn_path(x: &DataMatrix, cfg: &EstimatorConfig, grid: &PenaltyGrid) -> Result<Vec<LearnResult>> {
    let d = x.ncols();
    if d < 3 {
        return Err(Error::Argument("eglearn needs at least 3 variables".into()));
    }
    let n = x.nrows();
    let k = cfg.k(n);
    EstimatorConfig::new(cfg.p)?;
    if k < 2 {
        return Err(Error::Config(format!("only {k} exceedances")));
    }
    if k < d {
        log::warn!("eglearn: {k} exceedances for {d} variables; regressions are ill-posed without a penalty");
    }
    let pareto = crate::estimators::rank_pareto_transform(x)?;
    let logs = pareto.values().map(f64::ln);
    let rows_by_root: Vec<Vec<usize>> = (0..d).map(|m| crate::estimators::top_k_rows(pareto.values(), m, k)).collect();
    let per_root: Vec<(Vec<Vec<Vec<bool>>>, bool)> = (0..d)
        .into_par_iter()
        .map(|m| {
            let s = root_gram(&logs, &rows_by_root[m], m);
            root_selections(&s, m, d, grid.values())
        })
        .collect();
    if per_root.iter().any(|(_, ok)| !ok) {
        log::warn!("eglearn: some regressions stopped at the sweep limit before reaching the gap tolerance");
    }
    let needed = d - 2;
    let mut results = Vec::with_capacity(grid.values().len());
    for (g, &rho) in grid.values().iter().enumerate() {
        let mut graph = UndirectedGraph::new(d);
        let mut scores = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let votes = (0..d)
                    .filter(|&m| m != i && m != j && per_root[m].0[g][i][j])
                    .count();
                if 2 * votes > needed {
                    graph.add_edge(i, j)?;
                    scores.push(((i, j), votes as f64));
                }
            }
        }
        results.push(LearnResult::new(graph, scores, Some(rho)));
    }
    Ok(results)
}

/// Vote counts per pair at one penalty; used for diagnostics output.
pub fn eglearn_votes(x: &DataMatrix, cfg: &EstimatorConfig, grid: &PenaltyGrid) -> Result<Vec<Matrix>> {
    let d = x.ncols();
    if d < 3 {
        return Err(Error::Argument("eglearn needs at least 3 variables".into()));
    }
    EstimatorConfig::new(cfg.p)?;
    let k = cfg.k(x.nrows());
    if k < 2 {
        return Err(Error::Config(format!("only {k} exceedances")));
    }
    let pareto = crate::estimators::rank_pareto_transform(x)?;
    let logs = pareto.values().map(f64::ln);
    let per_root: Vec<Vec<Vec<Vec<bool>>>> = (0..d)
        .into_par_iter()
        .map(|m| {
            let rows = crate::estimators::top_k_rows(pareto.values(), m, k);
            root_selections(&root_gram(&logs, &rows, m), m, d, grid.values()).0
        })
        .collect();
    Ok((0..grid.values().len())
        .map(|g| {
            Matrix::from_fn(d, d, |i, j| {
                (0..d).filter(|&m| m != i && m != j && i != j && per_root[m][g][i][j]).count() as f64
            })
        })
        .collect())
}

/// Laplacian-constrained surrogate MLE and its solver diagnostics.
#[derive(Debug, Clone)]
pub struct Emtp2Fit {
    pub model: FittedModel,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Maximizes `log Det Θ + ½ Σ Θ_ij Γ̂_ij` over graph Laplacians
/// `Θ = Σ_{i<j} w_ij (e_i − e_j)(e_i − e_j)ᵀ`, `w ≥ 0`, by projected Newton:
/// each step maximizes the local quadratic model over the nonnegative orthant
/// with coordinate descent, followed by a backtracking line search.
pub fn emtp2_fit(ghat: &Matrix) -> Result<Emtp2Fit> {
    let g = symmetrize(ghat)?;
    let d = g.nrows();
    if d < 2 {
        return Err(Error::Dimension("need at least 2 variables".into()));
    }
    let edges: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
    let target: Vec<f64> = edges.iter().map(|&(i, j)| g[(i, j)]).collect();
    if let Some(&(i, j)) = edges.iter().zip(&target).find(|(_, t)| !(**t > 0.0)).map(|(e, _)| e) {
        return Err(Error::InvalidVariogram(format!("entry ({},{}) = {} is not positive", i + 1, j + 1, g[(i, j)])));
    }
    let scale = target.iter().fold(1.0_f64, |a, b| a.max(*b));
    let tol = EMTP2_KKT_TOL * scale;

    let m = edges.len();
    let mut w: Vec<f64> = target.iter().map(|t| 2.0 / (d as f64 * t)).collect();
    let mut state = laplacian::evaluate(d, &edges, &w).ok_or_else(|| Error::Convergence {
        method: "emtp2",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let all: Vec<usize> = (0..m).collect();
    let mut residual = f64::INFINITY;
    for iter in 0..EMTP2_MAX_ITER {
        let grad = laplacian::gradient(&state, &edges, &target);
        residual = kkt_residual(&w, &grad);
        if residual < tol {
            return finish_emtp2(d, &edges, &w, &state, residual, iter);
        }
        let h = laplacian::neg_hessian(&state, &edges, &all);
        let v = nonneg_qp(&h, &grad, &w);
        let dir: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            // the quadratic model cannot improve; fall back to a projected
            // gradient step
            log::debug!("emtp2: Newton direction not ascent at iteration {iter}");
        }
        let f0 = laplacian::objective(&state, &w, &target);
        let (dir, slope) = if slope > 0.0 {
            (dir, slope)
        } else {
            let pg: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| (wi + gi).max(0.0) - wi).collect();
            let s = pg.iter().zip(&grad).map(|(a, b)| a * b).sum();
            (pg, s)
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-16 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, s)| (a + t * s).max(0.0)).collect();
            if let Some(next) = laplacian::evaluate(d, &edges, &trial) {
                let f1 = laplacian::objective(&next, &trial, &target);
                if f1 >= f0 + 1e-4 * t * slope {
                    w = trial;
                    state = next;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            let grad = laplacian::gradient(&state, &edges, &target);
            residual = kkt_residual(&w, &grad);
            if residual < tol {
                return finish_emtp2(d, &edges, &w, &state, residual, iter);
            }
            break;
        }
    }
    Err(Error::Convergence {
        method: "emtp2",
        iterations: EMTP2_MAX_ITER,
        residual,
    })
}

/// `max_e |max(0, w_e + g_e) − w_e|`: zero exactly at a KKT point.
fn kkt_residual(w: &[f64], grad: &[f64]) -> f64 {
    w.iter()
        .zip(grad)
        .map(|(wi, gi)| ((wi + gi).max(0.0) - wi).abs())
        .fold(0.0, f64::max)
}

/// Maximizes `gᵀ(v − w) − ½(v − w)ᵀH(v − w)` over `v ≥ 0`.
fn nonneg_qp(h: &Matrix, g: &[f64], w: &[f64]) -> Vec<f64> {
    let m = w.len();
    let mut v = w.to_vec();
    // r = g − H(v − w), kept up to date
    let mut r = g.to_vec();
    let scale = g.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1e-300);
    for _ in 0..QP_MAX_SWEEPS {
        let mut change = 0.0_f64;
        for e in 0..m {
            let hee = h[(e, e)];
            if hee <= 0.0 {
                continue;
            }
            let new = (v[e] + r[e] / hee).max(0.0);
            let delta = new - v[e];
            if delta != 0.0 {
                for f in 0..m {
                    r[f] -= h[(f, e)] * delta;
                }
                v[e] = new;
                change = change.max((delta * hee).abs());
            }
        }
        if change <= 1e-14 * scale {
            break;
        }
    }
    v
}

fn finish_emtp2(
    d: usize,
    edges: &[(usize, usize)],
    w: &[f64],
    state: &laplacian::EdgeState,
    residual: f64,
    iterations: usize,
) -> Result<Emtp2Fit> {
    let theta = laplacian::theta_from_weights(d, edges, w);
    let gamma = Variogram::new(sigma_to_gamma(&state.sigma))?;
    let graph = support_graph(&theta, SUPPORT_TOL);
    let precision = Precision::new(theta)?;
    Ok(Emtp2Fit {
        model: FittedModel {
            graph,
            gamma,
            theta: precision,
            threshold: None,
            method: "emtp2".into(),
            penalty: None,
        },
        kkt_residual: residual,
        iterations,
    })
}

/// Output of the shifted graphical lasso.
#[derive(Debug, Clone)]
pub struct ShiftFit {
    pub result: LearnResult,
    /// `Θ̂ = Θ̂* − c𝟙𝟙ᵀ`
    pub theta: Matrix,
    /// Whether `Θ̂` satisfies the precision-matrix invariants.
    pub valid: bool,
    pub iterations: usize,
}

/// Shifted graphical lasso: minimizes
/// `−log det Θ* + tr(Θ* Σ̂*) + λ Σ_{i≠j} |Θ*_ij − c|` over positive definite
/// `Θ*`, with `Σ̂* = P(−Γ̂/2)P + 𝟙𝟙ᵀ/(c d²)`. `c` defaults to `1/d`.
pub fn parameter_shift_fit(ghat: &Matrix, lambda: f64, c: Option<f64>) -> Result<ShiftFit> {
    let g = symmetrize(ghat)?;
    let d = g.nrows();
    if d < 2 {
        return Err(Error::Dimension("need at least 2 variables".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Argument(format!("penalty {lambda} must be nonnegative")));
    }
    let c = c.unwrap_or(1.0 / d as f64);
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Argument(format!("shift constant {c} must be positive")));
    }
    let shift = Matrix::from_element(d, d, c);
    let s = center_project(&(g * -0.5))? + Matrix::from_element(d, d, 1.0 / (c * (d * d) as f64));
    let s_chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Argument("shifted covariance is not positive definite".into()))?;

    let (z, iterations) = if lambda == 0.0 {
        (s_chol.inverse(), 0)
    } else {
        shift_admm(&s, &shift, lambda, d)?
    };
    let mut theta = z - &shift;
    if lambda == 0.0 {
        crate::linalg::symmetrize_in_place(&mut theta);
    }
    let graph = support_graph(&theta, SUPPORT_TOL);
    let scores = graph.edges().into_iter().map(|(i, j)| ((i, j), theta[(i, j)].abs())).collect();
    let valid = Precision::new(theta.clone()).is_ok();
    Ok(ShiftFit {
        result: LearnResult::new(graph, scores, Some(lambda)),
        theta,
        valid,
        iterations,
    })
}

fn shift_admm(s: &Matrix, shift: &Matrix, lambda: f64, d: usize) -> Result<(Matrix, usize)> {
    let mut rho = 1.0;
    let mut z = {
        let diag = s.diagonal().map(|v| 1.0 / v);
        let mut z = shift.clone();
        for i in 0..d {
            z[(i, i)] = diag[i];
        }
        z
    };
    let mut u = Matrix::zeros(d, d);
    let dim = d as f64;
    for iter in 1..=SHIFT_MAX_ITER {
        // X-update: ρX − X⁻¹ = ρ(Z − U) − S
        let eig = symmetric_eigen(&((&z - &u) * rho - s))?;
        let vals = eig.eigenvalues.map(|l| (l + (l * l + 4.0 * rho).sqrt()) / (2.0 * rho));
        let x = &eig.eigenvectors * Matrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        // Z-update: shrink off-diagonals toward c
        let v = &x + &u;
        let t = lambda / rho;
        let z_old = z.clone();
        z = Matrix::from_fn(d, d, |i, j| {
            if i == j {
                v[(i, i)]
            } else {
                shift[(i, j)] + soft(0.5 * (v[(i, j)] + v[(j, i)]) - shift[(i, j)], t)
            }
        });
        u += &x - &z;
        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        let eps_pri = SHIFT_EPS_ABS * dim + SHIFT_EPS_REL * x.norm().max(z.norm());
        let eps_dual = SHIFT_EPS_ABS * dim + SHIFT_EPS_REL * rho * u.norm();
        if primal <= eps_pri && dual <= eps_dual {
            return Ok((z, iter));
        }
        // residual balancing
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    Err(Error::Convergence {
        method: "parameter shift",
        iterations: SHIFT_MAX_ITER,
        residual: f64::NAN,
    })
}

/// Extremal graphical lasso objective
/// `−log Det Θ − ½ Σ Θ_ij Γ̂_ij + λ Σ_{i≠j} |Θ_ij|`, for diagnostics only.
pub fn eglasso_objective(theta: &Matrix, ghat: &Matrix, lambda: f64) -> Result<f64> {
    if theta.shape() != ghat.shape() {
        return Err(Error::Dimension("operands differ in shape".into()));
    }
    let log_det = log_pseudo_determinant(theta, DEFAULT_EIGEN_TOL)?;
    let trace: f64 = theta.iter().zip(ghat.iter()).map(|(a, b)| a * b).sum();
    let d = theta.nrows();
    let mut l1 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                l1 += theta[(i, j)].abs();
            }
        }
    }
    Ok(-log_det - 0.5 * trace + lambda * l1)
}
