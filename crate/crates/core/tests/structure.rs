mod common;

use common::*;
use xgraph_core::hr::check_metric_property;
use xgraph_core::simulation::sample_hr_pareto;
use xgraph_core::structure::*;
use xgraph_core::*;

fn hr_data(g: &Variogram, n: usize, seed: u64) -> DataMatrix {
    sample_hr_pareto(g, n, seed).unwrap().to_data().unwrap()
}

fn off_diag_max(t: &Matrix) -> f64 {
    let d = t.nrows();
    (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|e| t[e])
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn emst_on_fig4_completed_weights() {
    let r = emst_from_weights(&fig4_completed()).unwrap();
    assert_eq!(r.graph.edges(), edges1(&[(1, 2), (1, 4), (3, 4), (4, 5)]));
    assert!(r.connected);
    let total: f64 = r.scores.iter().map(|s| s.1).sum();
    assert_eq!(total, 22.0);
}

#[test]
fn emst_two_nodes() {
    let r = emst_from_weights(&mat(&[&[0.0, 7.0], &[7.0, 0.0]])).unwrap();
    assert_eq!(r.graph.edges(), vec![(0, 1)]);
}

#[test]
fn emst_recovers_path_tree_and_is_rank_invariant() {
    let tree = graph1(4, &[(1, 2), (2, 3), (3, 4)]);
    let w: Vec<_> = tree.edges().into_iter().map(|e| (e, 1.0)).collect();
    let g = Variogram::new(tree_gamma(&tree, &w)).unwrap();
    let cfg = EstimatorConfig::new(0.95).unwrap();
    let mut hits = 0;
    for seed in 0..5 {
        let x = hr_data(&g, 50_000, seed);
        let r = emst(&x, &cfg, WeightKind::Variogram).unwrap();
        assert!(r.graph.is_tree());
        hits += (r.graph == tree) as usize;
        let warped = DataMatrix::new(x.values().map(|v| v.sqrt())).unwrap();
        assert_eq!(emst(&warped, &cfg, WeightKind::Variogram).unwrap().graph, r.graph);
        assert!(emst(&x, &cfg, WeightKind::Chi).unwrap().graph.is_tree());
    }
    assert_eq!(hits, 5);
}

#[test]
fn eglearn_extremes_of_penalty() {
    let x = hr_data(&fig4_laplacian_gamma(), 20_000, 2);
    let cfg = EstimatorConfig::new(0.9).unwrap();
    let dense = eglearn(&x, &cfg, 0.0).unwrap();
    assert_eq!(dense.graph.num_edges(), 10);
    let empty = eglearn(&x, &cfg, 10.0).unwrap();
    assert_eq!(empty.graph.num_edges(), 0);
    assert!(!empty.connected);
    assert_eq!(empty.penalty, Some(10.0));
}

#[test]
fn eglearn_rejects_two_variables() {
    let x = hr_data(&Variogram::new(mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), 1000, 1);
    assert!(eglearn(&x, &EstimatorConfig::default(), 0.1).is_err());
}

#[test]
fn eglearn_path_is_nearly_monotone_and_votes_agree() {
    let grid = PenaltyGrid::log_spaced(0.005, 0.5, 12).unwrap();
    let cfg = EstimatorConfig::new(0.95).unwrap();
    let (mut pairs, mut monotone) = (0, 0);
    for seed in 0..4 {
        let x = hr_data(&fig4_laplacian_gamma(), 40_000, 100 + seed);
        let path = eglearn_path(&x, &cfg, &grid).unwrap();
        for w in path.windows(2) {
            pairs += 1;
            monotone += w[1].graph.edges().iter().all(|&(i, j)| w[0].graph.has_edge(i, j)) as usize;
        }
        let votes = eglearn_votes(&x, &cfg, &grid).unwrap();
        for (r, v) in path.iter().zip(&votes) {
            for i in 0..5 {
                for j in (i + 1)..5 {
                    assert_eq!(r.graph.has_edge(i, j), 2.0 * v[(i, j)] > 3.0);
                }
            }
        }
    }
    assert!(monotone as f64 >= 0.95 * pairs as f64, "{monotone}/{pairs}");
}

#[test]
fn emtp2_two_nodes_is_inactive() {
    let fit = emtp2_fit(&mat(&[&[0.0, 2.0], &[2.0, 0.0]])).unwrap();
    let t = fit.model.theta.matrix();
    assert!((t - mat(&[&[0.5, -0.5], &[-0.5, 0.5]])).abs().max() < 1e-9);
    assert!((fit.model.gamma.get(0, 1) - 2.0).abs() < 1e-9);
}

#[test]
fn emtp2_on_tree_metric_is_inactive() {
    let g = fig3_full();
    let fit = emtp2_fit(&g).unwrap();
    assert!((fit.model.gamma.matrix() - &g).abs().max() < 1e-6);
    let truth = gamma_to_theta(&Variogram::new(g).unwrap()).unwrap();
    assert!((fit.model.theta.matrix() - truth.matrix()).abs().max() < 1e-6);
    assert_eq!(fit.model.graph, truth.support_graph(SUPPORT_TOL));
}

#[test]
fn emtp2_invariants_on_estimates() {
    let cfg = EstimatorConfig::new(0.95).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let mut inputs: Vec<Matrix> = (0..3)
        .map(|s| emp_vario_joint(&hr_data(&fig4_laplacian_gamma(), 20_000, s), &cfg).unwrap())
        .collect();
    inputs.extend((0..5).map(|_| random_variogram(6, &mut rng)));
    inputs.push(fig4_completed());
    for g in inputs {
        let fit = emtp2_fit(&g).unwrap();
        let t = fit.model.theta.matrix();
        assert!(off_diag_max(t) <= 1e-9);
        assert!(fit.kkt_residual < 1e-8 * g.max().max(1.0));
        assert!(check_metric_property(fit.model.gamma.matrix()).holds);
        for (i, j) in fit.model.graph.edges() {
            assert!((fit.model.gamma.get(i, j) - g[(i, j)]).abs() < 1e-6, "({i},{j})");
        }
        // non-edges: the data variogram can only be larger than the fit there
        let d = g.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if !fit.model.graph.has_edge(i, j) {
                    assert!(fit.model.gamma.get(i, j) <= g[(i, j)] + 1e-6);
                }
            }
        }
    }
}

#[test]
fn emtp2_rejects_nonpositive_entries() {
    assert!(emtp2_fit(&mat(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0]])).is_err());
}

#[test]
fn shift_without_penalty_inverts_exactly() {
    let g = fig4_laplacian_gamma();
    let fit = parameter_shift_fit(g.matrix(), 0.0, None).unwrap();
    assert!((&fit.theta - fig4_laplacian_theta()).abs().max() < 1e-6);
    assert!(fit.valid);
    assert_eq!(fit.result.graph, fig4_graph());
    let other_c = parameter_shift_fit(g.matrix(), 0.0, Some(3.0)).unwrap();
    assert!((&other_c.theta - fig4_laplacian_theta()).abs().max() < 1e-6);
}

#[test]
fn shift_with_large_penalty_is_empty() {
    let fit = parameter_shift_fit(fig4_laplacian_gamma().matrix(), 100.0, None).unwrap();
    assert_eq!(fit.result.graph.num_edges(), 0);
    assert!(!fit.result.connected);
}

#[test]
fn shift_penalty_sparsifies_estimate() {
    let x = hr_data(&fig4_laplacian_gamma(), 50_000, 11);
    let g = emp_vario_joint(&x, &EstimatorConfig::new(0.95).unwrap()).unwrap();
    let dense = parameter_shift_fit(&g, 0.0, None).unwrap();
    assert_eq!(dense.result.graph.num_edges(), 10);
    let mut best = usize::MAX;
    for lambda in [0.01, 0.02, 0.05, 0.1, 0.2] {
        let fit = parameter_shift_fit(&g, lambda, None).unwrap();
        let e = &fit.result.graph;
        let mismatch = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .filter(|&(i, j)| e.has_edge(i, j) != fig4_graph().has_edge(i, j))
            .count();
        best = best.min(mismatch);
    }
    assert!(best <= 1, "{best}");
}

#[test]
fn lasso_objective_matches_surrogate() {
    let g = fig4_laplacian_gamma();
    let theta = fig4_laplacian_theta();
    let ll = surrogate_loglik(&Precision::new(theta.clone()).unwrap(), g.matrix()).unwrap();
    assert!((eglasso_objective(&theta, g.matrix(), 0.0).unwrap() + ll).abs() < 1e-10);
    let l1: f64 = (0..5)
        .flat_map(|i| (0..5).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|e| theta[e].abs())
        .sum();
    let pen = eglasso_objective(&theta, g.matrix(), 0.5).unwrap();
    assert!((pen + ll - 0.5 * l1).abs() < 1e-10);
}

#[test]
fn penalty_grid_is_sorted_and_validated() {
    assert_eq!(PenaltyGrid::new(vec![0.3, 0.1, 0.2]).unwrap().values(), &[0.1, 0.2, 0.3]);
    assert!(PenaltyGrid::new(vec![-1.0]).is_err());
    assert!(PenaltyGrid::new(vec![]).is_err());
    let g = PenaltyGrid::log_spaced(0.01, 1.0, 3).unwrap();
    assert!((g.values()[1] - 0.1).abs() < 1e-12);
}
