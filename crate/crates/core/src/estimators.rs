//! Rank-based tail estimators: Pareto standardization, empirical extremal
//! variograms, empirical extremal correlation and the relative test score.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hr::{check_variogram, gamma_to_theta, surrogate_loglik, FittedModel, Variogram};
use crate::linalg::Matrix;

/// Symmetric, unit-diagonal matrix of extremal correlations.
pub type ExtremalCorrelationMatrix = Matrix;

/// `n × d` observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::Dimension(format!("need at least 2 rows, got {}", values.nrows())));
        }
        if values.ncols() < 1 {
            return Err(Error::Dimension("data has no columns".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Domain(format!("non-finite value at row {r}, column {c}")));
        }
        Ok(DataMatrix { values, names: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        DataMatrix::new(Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                self.ncols()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.nrows() {
            return Err(Error::Argument(format!("row range {start}..{end} of {}", self.nrows())));
        }
        let mut out = DataMatrix::new(self.values.rows(start, end - start).into_owned())?;
        out.names = self.names.clone();
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.nrows()) {
            return Err(Error::Argument(format!("row {bad} out of range")));
        }
        let m = Matrix::from_fn(idx.len(), self.ncols(), |r, c| self.values[(idx[r], c)]);
        let mut out = DataMatrix::new(m)?;
        out.names = self.names.clone();
        Ok(out)
    }
}

/// Threshold probability `p`; each root keeps `k = ⌈n(1 − p)⌉` exceedances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub p: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { p: 0.95 }
    }
}

impl EstimatorConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("threshold probability {p} not in (0,1)")));
        }
        Ok(EstimatorConfig { p })
    }

    /// Exceedance count for `n` rows. The small offset keeps `n(1 − p)` that
    /// is an integer up to round-off from being bumped up by one.
    pub fn k(&self, n: usize) -> usize {
        let raw = n as f64 * (1.0 - self.p);
        ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
    }

    fn k_at_least(&self, n: usize, min: usize) -> Result<usize> {
        EstimatorConfig::new(self.p)?;
        let k = self.k(n);
        if k < min {
            return Err(Error::Config(format!(
                "p = {} leaves {k} exceedances out of {n} rows, need at least {min}",
                self.p
            )));
        }
        Ok(k)
    }
}

/// Column-wise `x ↦ (n+1)/(n+1−rank(x))` with average ranks for ties.
pub fn rank_pareto_transform(x: &DataMatrix) -> Result<DataMatrix> {
    let n = x.nrows();
    let d = x.ncols();
    let mut out = Matrix::zeros(n, d);
    for j in 0..d {
        let col: Vec<f64> = x.values.column(j).iter().copied().collect();
        let ranks = average_ranks(&col);
        if ranks.iter().all(|&r| r == ranks[0]) {
            return Err(Error::DegenerateMargin(j));
        }
        for (i, r) in ranks.into_iter().enumerate() {
            out[(i, j)] = (n as f64 + 1.0) / (n as f64 + 1.0 - r);
        }
    }
    Ok(DataMatrix {
        values: out,
        names: x.names.clone(),
    })
}

/// 1-based ranks; tied values share the mean of their positions.
fn average_ranks(col: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut ranks = vec![0.0; col.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && col[order[end]] == col[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Indices of the `k` largest entries of column `m`, ties to the lower row.
pub(crate) fn top_k_rows(values: &Matrix, m: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.nrows()).collect();
    order.sort_by(|&a, &b| values[(b, m)].total_cmp(&values[(a, m)]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

fn vario_rooted(logs: &Matrix, ranks: &Matrix, m: usize, k: usize) -> Matrix {
    let d = logs.ncols();
    let rows = top_k_rows(ranks, m, k);
    let mut g = Matrix::zeros(d, d);
    let kf = rows.len() as f64;
    for i in 0..d {
        for j in (i + 1)..d {
            let diffs = rows.iter().map(|&r| logs[(r, i)] - logs[(r, j)]);
            let mean = diffs.clone().sum::<f64>() / kf;
            let ss: f64 = diffs.map(|v| (v - mean) * (v - mean)).sum();
            let var = ss / (kf - 1.0);
            g[(i, j)] = var;
            g[(j, i)] = var;
        }
    }
    g
}

fn pareto_logs(x: &DataMatrix) -> Result<(Matrix, Matrix)> {
    let pareto = rank_pareto_transform(x)?;
    let logs = pareto.values.map(f64::ln);
    Ok((pareto.values, logs))
}

/// Sample variances of `log x_i − log x_j` over the `k` rows where column
/// `m` is largest.
pub fn emp_vario_m(x: &DataMatrix, m: usize, cfg: &EstimatorConfig) -> Result<Matrix> {
    if m >= x.ncols() {
        return Err(Error::Argument(format!("root {m} out of range")));
    }
    let k = cfg.k_at_least(x.nrows(), 2)?;
    let (pareto, logs) = pareto_logs(x)?;
    Ok(vario_rooted(&logs, &pareto, m, k))
}

/// Average of the rooted estimators over all roots, summed in root order.
pub fn emp_vario_joint(x: &DataMatrix, cfg: &EstimatorConfig) -> Result<Matrix> {
    let k = cfg.k_at_least(x.nrows(), 2)?;
    let (pareto, logs) = pareto_logs(x)?;
    let d = x.ncols();
    let per_root: Vec<Matrix> = (0..d)
        .into_par_iter()
        .map(|m| vario_rooted(&logs, &pareto, m, k))
        .collect();
    let mut total = Matrix::zeros(d, d);
    for g in &per_root {
        total += g;
    }
    Ok(total / d as f64)
}

/// `χ̂_ij = |E_i ∩ E_j| / k` where `E_i` are the top-`k` rows of column `i`.
/// Both conditional directions share the denominator `k`, so the average of
/// the two is this value.
pub fn emp_chi(x: &DataMatrix, cfg: &EstimatorConfig) -> Result<ExtremalCorrelationMatrix> {
    let k = cfg.k_at_least(x.nrows(), 1)?;
    let pareto = rank_pareto_transform(x)?;
    let d = x.ncols();
    let n = x.nrows();
    let masks: Vec<Vec<bool>> = (0..d)
        .map(|j| {
            let mut mask = vec![false; n];
            for r in top_k_rows(&pareto.values, j, k) {
                mask[r] = true;
            }
            mask
        })
        .collect();
    let mut chi = Matrix::identity(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let both = masks[i].iter().zip(&masks[j]).filter(|(a, b)| **a && **b).count();
            let v = both as f64 / k as f64;
            chi[(i, j)] = v;
            chi[(j, i)] = v;
        }
    }
    Ok(chi)
}

/// Test-set score of a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglikScore {
    /// `ℓ(Θ̂; Γ̂_test) − ℓ(Θ̂_sat; Γ̂_test)` when the saturated reference
    /// exists, otherwise the raw value.
    pub score: f64,
    pub raw: f64,
    pub saturated: Option<f64>,
}

impl LoglikScore {
    /// False when `Γ̂_test` is not a valid variogram and `score` is raw.
    pub fn is_relative(&self) -> bool {
        self.saturated.is_some()
    }
}

/// Surrogate likelihood of `model` at the empirical variogram of `x_test`,
/// relative to the saturated model of the test data.
pub fn evaluate_loglik(model: &FittedModel, x_test: &DataMatrix, cfg: &EstimatorConfig) -> Result<LoglikScore> {
    if model.dim() != x_test.ncols() {
        return Err(Error::Dimension(format!(
            "model has {} variables, test data {}",
            model.dim(),
            x_test.ncols()
        )));
    }
    let g_test = emp_vario_joint(x_test, cfg)?;
    score_against(model, &g_test)
}

/// As [`evaluate_loglik`] with a precomputed test variogram.
pub fn score_against(model: &FittedModel, g_test: &Matrix) -> Result<LoglikScore> {
    let raw = surrogate_loglik(&model.theta, g_test)?;
    let saturated = if check_variogram(g_test)?.valid {
        let theta_sat = gamma_to_theta(&Variogram::new(g_test.clone())?)?;
        Some(surrogate_loglik(&theta_sat, g_test)?)
    } else {
        log::warn!("test variogram is not valid; reporting the raw surrogate likelihood");
        None
    };
    Ok(LoglikScore {
        score: saturated.map_or(raw, |s| raw - s),
        raw,
        saturated,
    })
}
