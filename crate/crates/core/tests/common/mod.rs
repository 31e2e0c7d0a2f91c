//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xgraph_core::graph::Dag;
use xgraph_core::{Matrix, UndirectedGraph, Variogram};

pub fn mat(rows: &[&[f64]]) -> Matrix {
    Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// 0-based edges from 1-based pairs.
pub fn edges1(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    pairs.iter().map(|&(i, j)| (i - 1, j - 1)).collect()
}

pub fn graph1(d: usize, pairs: &[(usize, usize)]) -> UndirectedGraph {
    UndirectedGraph::from_edges(d, &edges1(pairs)).unwrap()
}

pub const NA: f64 = f64::NAN;

/// Partial matrix of the five-node completion example; unknown entries NaN.
pub fn fig4_partial() -> Matrix {
    mat(&[
        &[0.0, 10.0, 4.0, 3.0, NA],
        &[10.0, 0.0, 18.0, NA, NA],
        &[4.0, 18.0, 0.0, 3.0, NA],
        &[3.0, NA, 3.0, 0.0, 6.0],
        &[NA, NA, NA, 6.0, 0.0],
    ])
}

pub fn fig4_graph() -> UndirectedGraph {
    graph1(5, &[(1, 2), (1, 3), (1, 4), (2, 3), (3, 4), (4, 5)])
}

pub fn fig4_completed() -> Matrix {
    mat(&[
        &[0.0, 10.0, 4.0, 3.0, 9.0],
        &[10.0, 0.0, 18.0, 15.0, 21.0],
        &[4.0, 18.0, 0.0, 3.0, 9.0],
        &[3.0, 15.0, 3.0, 0.0, 6.0],
        &[9.0, 21.0, 9.0, 6.0, 0.0],
    ])
}

/// Six-node block graph with cliques {1,2,3}, {3,4,5}, {4,6}... as edges.
pub fn fig3_graph() -> UndirectedGraph {
    graph1(6, &[(1, 2), (1, 3), (2, 3), (3, 4), (3, 5), (4, 5), (4, 6)])
}

pub fn fig3_partial() -> Matrix {
    let mut m = Matrix::from_element(6, 6, NA);
    for i in 0..6 {
        m[(i, i)] = 0.0;
    }
    for &((i, j), v) in &[
        ((1, 2), 6.0),
        ((1, 3), 6.0),
        ((2, 3), 4.0),
        ((3, 4), 6.0),
        ((3, 5), 4.0),
        ((4, 5), 10.0),
        ((4, 6), 10.0),
    ] {
        m[(i - 1, j - 1)] = v;
        m[(j - 1, i - 1)] = v;
    }
    m
}

pub fn fig3_full() -> Matrix {
    mat(&[
        &[0.0, 6.0, 6.0, 12.0, 10.0, 22.0],
        &[6.0, 0.0, 4.0, 10.0, 8.0, 20.0],
        &[6.0, 4.0, 0.0, 6.0, 4.0, 16.0],
        &[12.0, 10.0, 6.0, 0.0, 10.0, 10.0],
        &[10.0, 8.0, 4.0, 10.0, 0.0, 20.0],
        &[22.0, 20.0, 16.0, 10.0, 20.0, 0.0],
    ])
}

/// Graph Laplacian with the given 1-based weighted edges.
pub fn laplacian1(d: usize, weighted: &[((usize, usize), f64)]) -> Matrix {
    let mut t = Matrix::zeros(d, d);
    for &((i, j), w) in weighted {
        let (i, j) = (i - 1, j - 1);
        t[(i, i)] += w;
        t[(j, j)] += w;
        t[(i, j)] -= w;
        t[(j, i)] -= w;
    }
    t
}

/// Γ from a precision matrix by the textbook route, independent of the
/// library's map: Σ = (Θ + 𝟙𝟙ᵀ/d)⁻¹ − 𝟙𝟙ᵀ/d.
pub fn gamma_of_precision(theta: &Matrix) -> Matrix {
    let d = theta.nrows();
    let j = Matrix::from_element(d, d, 1.0 / d as f64);
    let sigma = (theta + &j).try_inverse().unwrap() - j;
    Matrix::from_fn(d, d, |a, b| sigma[(a, a)] + sigma[(b, b)] - 2.0 * sigma[(a, b)])
}

/// EMTP₂ model on the six-edge five-node graph, entries of order one.
pub fn fig4_laplacian_theta() -> Matrix {
    laplacian1(
        5,
        &[
            ((1, 2), 1.0),
            ((1, 3), 0.8),
            ((1, 4), 1.2),
            ((2, 3), 0.6),
            ((3, 4), 1.0),
            ((4, 5), 1.5),
        ],
    )
}

pub fn fig4_laplacian_gamma() -> Variogram {
    Variogram::new(gamma_of_precision(&fig4_laplacian_theta())).unwrap()
}

/// Γ = path sums of edge weights on a tree.
pub fn tree_gamma(tree: &UndirectedGraph, weights: &[((usize, usize), f64)]) -> Matrix {
    let d = tree.num_nodes();
    let w = |a: usize, b: usize| {
        weights
            .iter()
            .find(|((i, j), _)| (*i == a && *j == b) || (*i == b && *j == a))
            .unwrap()
            .1
    };
    Matrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            tree.unique_tree_path(i, j).unwrap().iter().map(|&(a, b)| w(a, b)).sum()
        }
    })
}

/// Random tree on `d` nodes with edge weights from `U(lo, hi)`.
pub fn random_tree(d: usize, lo: f64, hi: f64, seed: u64) -> (UndirectedGraph, Vec<((usize, usize), f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut g = UndirectedGraph::new(d);
    let mut weights = Vec::new();
    for k in 1..d {
        let parent = perm[rng.random_range(0..k)];
        let child = perm[k];
        g.add_edge(parent, child).unwrap();
        weights.push(((parent.min(child), parent.max(child)), rng.random_range(lo..hi)));
    }
    (g, weights)
}

/// Random strictly conditionally negative definite Γ from a random SPD Σ.
pub fn random_variogram(d: usize, rng: &mut impl Rng) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let sigma = &a * a.transpose() + Matrix::identity(d, d) * 0.1;
    Matrix::from_fn(d, d, |i, j| sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)])
}

pub fn fig1d_dag() -> Dag {
    Dag::from_arcs(4, &edges1(&[(1, 2), (1, 4), (2, 3), (4, 3)])).unwrap()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Bivariate Hüsler–Reiss exponent function V(y₁, y₂).
pub fn hr_v2(gamma: f64, y1: f64, y2: f64) -> f64 {
    let s = gamma.sqrt();
    norm_cdf(s / 2.0 + (y2 / y1).ln() / s) / y1 + norm_cdf(s / 2.0 + (y1 / y2).ln() / s) / y2
}

/// λ(y) = −∂²V/∂y₁∂y₂ by central differences.
pub fn hr_density2_fd(gamma: f64, y1: f64, y2: f64) -> f64 {
    let h1 = 1e-4 * y1;
    let h2 = 1e-4 * y2;
    let v = |a: f64, b: f64| hr_v2(gamma, a, b);
    let mixed = (v(y1 + h1, y2 + h2) - v(y1 + h1, y2 - h2) - v(y1 - h1, y2 + h2) + v(y1 - h1, y2 - h2))
        / (4.0 * h1 * h2);
    -mixed
}

/// χ = ∫₀^∞ e^{−t} P(W > −t) dt with W ~ N(−Γ/2, Γ), composite Simpson.
pub fn chi_quadrature(gamma: f64) -> f64 {
    let s = gamma.sqrt();
    let f = |t: f64| (-t).exp() * norm_cdf((t - gamma / 2.0) / s);
    let (a, b, n) = (0.0, 60.0, 200_000);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Asymptotic Kolmogorov distribution tail `Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let term = 2.0 * (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = a.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0_f64;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// All directed paths by brute force over node sequences, returning the
/// largest product of arc weights accumulated from the start node.
pub fn best_path_product(d: usize, arcs: &[((usize, usize), f64)], from: usize, to: usize) -> f64 {
    fn walk(
        v: usize,
        to: usize,
        acc: f64,
        arcs: &[((usize, usize), f64)],
        seen: &mut Vec<bool>,
        best: &mut f64,
    ) {
        if v == to {
            if acc > *best {
                *best = acc;
            }
            return;
        }
        for &((a, b), w) in arcs {
            if a == v && !seen[b] {
                seen[b] = true;
                walk(b, to, acc * w, arcs, seen, best);
                seen[b] = false;
            }
        }
    }
    let mut best = 0.0;
    let mut seen = vec![false; d];
    seen[from] = true;
    walk(from, to, 1.0, arcs, &mut seen, &mut best);
    best
}

/// Random DAG: arcs only from lower to higher position in a random order.
pub fn random_dag(d: usize, p_arc: f64, rng: &mut impl Rng) -> (Dag, Vec<((usize, usize), f64)>) {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut arcs = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < p_arc {
                arcs.push(((perm[a], perm[b]), rng.random_range(0.05..2.0)));
            }
        }
    }
    let plain: Vec<(usize, usize)> = arcs.iter().map(|a| a.0).collect();
    (Dag::from_arcs(d, &plain).unwrap(), arcs)
}

/// All nonempty subsets-free triples (A, B, C) of disjoint node sets with A,
/// B nonempty, encoded as bitmasks.
pub fn disjoint_triples(d: usize) -> Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let to_set = |mask: usize| (0..d).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>();
    let mut out = Vec::new();
    // label each node 0 (none), 1 (A), 2 (B), 3 (C)
    let total = 4usize.pow(d as u32);
    for code in 0..total {
        let (mut a, mut b, mut c) = (0, 0, 0);
        let mut x = code;
        for i in 0..d {
            match x % 4 {
                1 => a |= 1 << i,
                2 => b |= 1 << i,
                3 => c |= 1 << i,
                _ => {}
            }
            x /= 4;
        }
        if a != 0 && b != 0 {
            out.push((to_set(a), to_set(b), to_set(c)));
        }
    }
    out
}

/// Every DAG on `d` labelled nodes: each unordered pair is absent or
/// oriented either way; cyclic orientations are discarded.
pub fn all_dags(d: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut arcs = Vec::new();
        let mut x = code;
        for &(i, j) in &pairs {
            match x % 3 {
                1 => arcs.push((i, j)),
                2 => arcs.push((j, i)),
                _ => {}
            }
            x /= 3;
        }
        if let Ok(dag) = Dag::from_arcs(d, &arcs) {
            out.push(dag);
        }
    }
    out
}

/// Separation in the moralized skeleton of the ancestral set of A ∪ B ∪ C,
/// built from the arc list alone.
pub fn moral_separation(dag: &Dag, a: &[usize], b: &[usize], c: &[usize]) -> bool {
    let d = dag.num_nodes();
    let arcs = dag.arcs();
    let mut keep = vec![false; d];
    for &v in a.iter().chain(b).chain(c) {
        keep[v] = true;
    }
    loop {
        let mut grew = false;
        for &(u, v) in &arcs {
            if keep[v] && !keep[u] {
                keep[u] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let mut adj = vec![vec![false; d]; d];
    for &(u, v) in &arcs {
        if keep[u] && keep[v] {
            adj[u][v] = true;
            adj[v][u] = true;
        }
    }
    for v in 0..d {
        let parents: Vec<usize> = arcs.iter().filter(|&&(u, w)| w == v && keep[u] && keep[v]).map(|a| a.0).collect();
        for &p in &parents {
            for &q in &parents {
                if p != q {
                    adj[p][q] = true;
                }
            }
        }
    }
    let mut seen = vec![false; d];
    let mut stack: Vec<usize> = a.to_vec();
    for &v in a {
        seen[v] = true;
    }
    while let Some(u) = stack.pop() {
        if b.contains(&u) {
            return false;
        }
        for w in 0..d {
            if adj[u][w] && !seen[w] && !c.contains(&w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    true
}

/// d-separation straight from the blocking definition: every simple path in
/// the skeleton between A and B must contain a non-collider in C or a
/// collider with neither itself nor a descendant in C.
pub fn path_blocking_separation(dag: &Dag, a: &[usize], b: &[usize], c: &[usize]) -> bool {
    let d = dag.num_nodes();
    let arcs = dag.arcs();
    let arc = |u: usize, v: usize| arcs.contains(&(u, v));
    let mut desc_or_self_in_c = vec![false; d];
    for v in 0..d {
        let mut seen = vec![false; d];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            if c.contains(&u) {
                desc_or_self_in_c[v] = true;
            }
            for w in 0..d {
                if arc(u, w) && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    fn extend(
        path: &mut Vec<usize>,
        d: usize,
        b: &[usize],
        adjacent: &dyn Fn(usize, usize) -> bool,
        blocked: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if path.len() > 1 && b.contains(&last) {
            return blocked(path);
        }
        for w in 0..d {
            if adjacent(last, w) && !path.contains(&w) {
                path.push(w);
                let ok = extend(path, d, b, adjacent, blocked);
                path.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let adjacent = |u: usize, v: usize| arc(u, v) || arc(v, u);
    let blocked = |p: &[usize]| {
        (1..p.len() - 1).any(|k| {
            let (x, m, y) = (p[k - 1], p[k], p[k + 1]);
            if arc(x, m) && arc(y, m) {
                !desc_or_self_in_c[m]
            } else {
                c.contains(&m)
            }
        })
    };
    a.iter().all(|&s| extend(&mut vec![s], d, b, &adjacent, &blocked))
}
