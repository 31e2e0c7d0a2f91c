//! Fixtures shared by the benchmarks.

use xgraph_core::{Matrix, PartialVariogram, UndirectedGraph, Variogram};

/// Variogram of a path tree with unit edge weights: Γ_ij = |i - j|.
pub fn path_variogram(d: usize) -> Variogram {
    let m = Matrix::from_fn(d, d, |i, j| i.abs_diff(j) as f64);
    Variogram::new(m).expect("path variogram is valid")
}

/// Cycle on `d` nodes with only edge entries known.
pub fn cycle_partial(d: usize) -> PartialVariogram {
    let edges: Vec<(usize, usize)> = (0..d).map(|i| (i, (i + 1) % d)).collect();
    let graph = UndirectedGraph::from_edges(d, &edges).expect("cycle");
    let full = path_variogram(d);
    PartialVariogram::new(graph, full.matrix()).expect("edge entries present")
}
