//! Exact samplers: Hüsler–Reiss Pareto vectors (rooted and unconditional),
//! max-linear models and recursive max-linear models on DAGs.
//!
//! Every sampler takes an explicit seed. Rows are generated in fixed-size
//! chunks, chunk `c` drawing from ChaCha stream `c`, so output does not depend
//! on the number of worker threads.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::DataMatrix;
use crate::graph::Dag;
use crate::hr::{sigma_m_unchecked, Variogram};
use crate::linalg::{cholesky_lower, Matrix};

const CHUNK: usize = 4096;
const CHOLESKY_JITTER: f64 = 1e-12;

/// Row sums of a max-linear coefficient matrix must equal 1 to this.
pub const ROW_SUM_TOL: f64 = 1e-8;

/// Samples plus the seed and model tag that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub values: Matrix,
    pub seed: u64,
    pub model: String,
}

impl SampleMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn to_data(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.values.clone())
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Uniform on the open interval (0, 1).
#[inline]
fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard Fréchet `−1/log U`.
#[inline]
fn frechet<R: RngCore>(rng: &mut R) -> f64 {
    -1.0 / open_uniform(rng).ln()
}

fn generate<F>(n: usize, d: usize, seed: u64, fill: F) -> Matrix
where
    F: Fn(&mut ChaCha20Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let blocks: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK.min(n - c * CHUNK);
            let mut rng = chunk_rng(seed, c);
            let mut buf = vec![0.0; rows * d];
            for row in buf.chunks_mut(d) {
                fill(&mut rng, row);
            }
            buf
        })
        .collect();
    let flat: Vec<f64> = blocks.into_iter().flatten().collect();
    Matrix::from_row_slice(n, d, &flat)
}

/// Cholesky factor of `Σ⁽ᵐ⁾` plus the increment means `−Γ_im/2`.
struct RootedLaw {
    root: usize,
    others: Vec<usize>,
    mean: DVector<f64>,
    chol: Matrix,
}

impl RootedLaw {
    fn new(gamma: &Variogram, root: usize) -> Result<Self> {
        let g = gamma.matrix();
        let sigma = sigma_m_unchecked(g, root);
        let chol = cholesky_lower(&sigma, CHOLESKY_JITTER)?;
        let others: Vec<usize> = (0..gamma.dim()).filter(|&i| i != root).collect();
        let mean = DVector::from_iterator(others.len(), others.iter().map(|&i| -0.5 * g[(i, root)]));
        Ok(RootedLaw {
            root,
            others,
            mean,
            chol,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R, row: &mut [f64]) {
        let k = self.others.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let incr = &self.mean + &self.chol * z;
        let ym = 1.0 / open_uniform(rng);
        row[self.root] = ym;
        for (a, &i) in self.others.iter().enumerate() {
            row[i] = ym * incr[a].exp();
        }
    }
}

/// Draws of `Y` conditioned on `Y_m > 1`: `Y_m` standard Pareto and
/// `log Y_i − log Y_m ~ N(−Γ_im/2, Σ⁽ᵐ⁾)` independently of it.
pub fn sample_y_m(gamma: &Variogram, m: usize, n: usize, seed: u64) -> Result<SampleMatrix> {
    let d = gamma.dim();
    if m >= d {
        return Err(Error::Argument(format!("root {m} out of range for dimension {d}")));
    }
    let law = RootedLaw::new(gamma, m)?;
    let values = generate(n, d, seed, |rng, row| law.draw(rng, row));
    Ok(SampleMatrix {
        values,
        seed,
        model: format!("hr_rooted_{}", m + 1),
    })
}

/// Draws of the Hüsler–Reiss Pareto vector on `{max y_i > 1}`.
///
/// A uniformly chosen root `J` gives a draw from the mixture with density
/// `λ(y) · #{i : y_i > 1} / d`; accepting with probability
/// `1 / #{i : y_i > 1}` leaves `λ(y)` restricted to the support.
pub fn sample_hr_pareto(gamma: &Variogram, n: usize, seed: u64) -> Result<SampleMatrix> {
    let d = gamma.dim();
    let laws = (0..d).map(|m| RootedLaw::new(gamma, m)).collect::<Result<Vec<_>>>()?;
    let values = generate(n, d, seed, |rng, row| loop {
        let j = rng.random_range(0..d);
        laws[j].draw(rng, row);
        let above = row.iter().filter(|&&v| v > 1.0).count();
        if above == 1 || rng.random::<f64>() * (above as f64) < 1.0 {
            break;
        }
    });
    Ok(SampleMatrix {
        values,
        seed,
        model: "hr_pareto".into(),
    })
}

/// Nonnegative `d × p` coefficient matrix of a max-linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxLinearCoeff {
    a: Matrix,
}

impl MaxLinearCoeff {
    /// Accepts any nonnegative matrix without a zero row; use
    /// [`MaxLinearCoeff::normalized`] to get unit row sums.
    pub fn new(a: Matrix) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Dimension("empty coefficient matrix".into()));
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument("coefficients must be finite and nonnegative".into()));
        }
        if let Some(i) = (0..a.nrows()).find(|&i| a.row(i).sum() <= 0.0) {
            return Err(Error::Argument(format!("row {i} is zero")));
        }
        Ok(MaxLinearCoeff { a })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.a.nrows()).map(|i| self.a.row(i).sum()).collect()
    }

    pub fn normalized(&self) -> MaxLinearCoeff {
        let mut a = self.a.clone();
        for (i, s) in self.row_sums().into_iter().enumerate() {
            a.row_mut(i).scale_mut(1.0 / s);
        }
        MaxLinearCoeff { a }
    }
}

/// `Z_i = max_j a_ij ε_j` with independent standard Fréchet `ε`.
pub fn sample_max_linear(a: &MaxLinearCoeff, n: usize, seed: u64) -> Result<SampleMatrix> {
    for (i, s) in a.row_sums().into_iter().enumerate() {
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Argument(format!("row {i} of A sums to {s}, expected 1")));
        }
    }
    let (d, p) = a.a.shape();
    let coeff = &a.a;
    let values = generate(n, d, seed, |rng, row| {
        let eps: Vec<f64> = (0..p).map(|_| frechet(rng)).collect();
        for (i, z) in row.iter_mut().enumerate() {
            *z = (0..p).map(|j| coeff[(i, j)] * eps[j]).fold(0.0, f64::max);
        }
    });
    Ok(SampleMatrix {
        values,
        seed,
        model: "maxlinear".into(),
    })
}

/// DAG with positive arc weights `c_ki` and node weights `c_ii`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveMLSpec {
    dag: Dag,
    node_weights: Vec<f64>,
    arc_weights: BTreeMap<(usize, usize), f64>,
}

impl RecursiveMLSpec {
    pub fn new(dag: Dag, node_weights: Vec<f64>, arc_weights: &[((usize, usize), f64)]) -> Result<Self> {
        let d = dag.num_nodes();
        if node_weights.len() != d {
            return Err(Error::Dimension(format!("{} node weights for {d} nodes", node_weights.len())));
        }
        if node_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Argument("node weights must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for &((k, i), w) in arc_weights {
            if !dag.has_arc(k, i) {
                return Err(Error::Argument(format!("weight for missing arc {} -> {}", k + 1, i + 1)));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Argument(format!("arc {} -> {} weight {w}", k + 1, i + 1)));
            }
            if map.insert((k, i), w).is_some() {
                return Err(Error::Argument(format!("duplicate weight for arc {} -> {}", k + 1, i + 1)));
            }
        }
        if let Some((k, i)) = dag.arcs().into_iter().find(|a| !map.contains_key(a)) {
            return Err(Error::Argument(format!("arc {} -> {} has no weight", k + 1, i + 1)));
        }
        Ok(RecursiveMLSpec {
            dag,
            node_weights,
            arc_weights: map,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn num_nodes(&self) -> usize {
        self.dag.num_nodes()
    }

    pub fn node_weight(&self, i: usize) -> f64 {
        self.node_weights[i]
    }

    pub fn arc_weight(&self, k: usize, i: usize) -> Option<f64> {
        self.arc_weights.get(&(k, i)).copied()
    }
}

/// `a_ij = c_jj · max over directed paths j → i of the product of arc
/// weights`, `a_ii = c_ii`, zero without a path. Products along a path are
/// accumulated from `j` outward.
pub fn ml_coefficients(spec: &RecursiveMLSpec) -> MaxLinearCoeff {
    let d = spec.num_nodes();
    let topo = spec.dag.topological_order();
    let mut a = Matrix::zeros(d, d);
    for j in 0..d {
        let mut best = vec![0.0_f64; d];
        best[j] = 1.0;
        let start = topo.iter().position(|&v| v == j).expect("node in order");
        for &v in &topo[start + 1..] {
            for u in spec.dag.parents(v) {
                if best[u] > 0.0 {
                    let cand = best[u] * spec.arc_weights[&(u, v)];
                    if cand > best[v] {
                        best[v] = cand;
                    }
                }
            }
        }
        for i in 0..d {
            a[(i, j)] = spec.node_weights[j] * best[i];
        }
    }
    MaxLinearCoeff { a }
}

/// `Z_i = max(max_{k ∈ pa(i)} c_ki Z_k, c_ii ε_i)` in topological order.
/// With `normalize`, `Z_i` is divided by the row sum of the implied
/// coefficient matrix so that every margin is standard Fréchet.
pub fn sample_recursive_max_linear(
    spec: &RecursiveMLSpec,
    n: usize,
    seed: u64,
    normalize: bool,
) -> Result<SampleMatrix> {
    let d = spec.num_nodes();
    let topo = spec.dag.topological_order().to_vec();
    let parents: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|i| spec.dag.parents(i).map(|k| (k, spec.arc_weights[&(k, i)])).collect())
        .collect();
    let scale: Vec<f64> = if normalize {
        ml_coefficients(spec).row_sums()
    } else {
        vec![1.0; d]
    };
    let values = generate(n, d, seed, |rng, row| {
        let eps: Vec<f64> = (0..d).map(|_| frechet(rng)).collect();
        for &i in &topo {
            let mut z = spec.node_weights[i] * eps[i];
            for &(k, c) in &parents[i] {
                z = z.max(c * row[k]);
            }
            row[i] = z;
        }
        if normalize {
            for (z, s) in row.iter_mut().zip(&scale) {
                *z /= s;
            }
        }
    });
    Ok(SampleMatrix {
        values,
        seed,
        model: if normalize { "recml_normalized" } else { "recml" }.into(),
    })
}
