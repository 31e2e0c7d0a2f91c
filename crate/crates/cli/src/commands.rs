use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::json;
use xgraph_core::hr::check_variogram;
use xgraph_core::io::{read_data_csv, read_matrix_csv, write_data_csv, write_matrix_csv};
use xgraph_core::simulation::{
    ml_coefficients, sample_hr_pareto, sample_max_linear, sample_recursive_max_linear, sample_y_m,
};
use xgraph_core::structure::{
    eglearn_path, eglearn_votes, emst, emtp2_fit, parameter_shift_fit, LearnResult, PenaltyGrid, WeightKind,
};
use xgraph_core::{
    complete_gamma, emp_chi, emp_vario_joint, evaluate_loglik, hr_chi, Dag, DataMatrix, EstimatorConfig, FittedModel,
    MaxLinearCoeff, Matrix, PartialVariogram, RecursiveMLSpec, UndirectedGraph, Variogram,
};

use crate::config::{Part, RunConfig, Split};
use crate::error::CliError;
use crate::output::{sha256_hex, RunDir};

fn estimator(cfg: &RunConfig) -> Result<EstimatorConfig, CliError> {
    EstimatorConfig::new(cfg.p).map_err(|e| CliError::config(e.to_string()))
}

/// Loads the observations and keeps the requested part of the split.
fn load_data(cfg: &RunConfig, run: &mut RunDir, part: Part) -> Result<DataMatrix, CliError> {
    let path = cfg.require(&cfg.data, "data")?;
    let table = read_data_csv(&run.read(path)?, cfg.key_column.as_deref())?;
    if table.dropped_rows > 0 {
        run.note("dropped_rows", json!(table.dropped_rows));
    }
    let data = table.data;
    let Some(split) = &cfg.split else {
        return Ok(data);
    };
    let selected = match split {
        Split::Rows { train, test } => {
            let [start, end] = if part == Part::Train { *train } else { *test };
            if end > data.nrows() {
                return Err(CliError::data(format!(
                    "row range [{start}, {end}) exceeds the {} data rows",
                    data.nrows()
                )));
            }
            data.slice_rows(start, end)?
        }
        Split::Key { train, test } => {
            let [lo, hi] = if part == Part::Train { train } else { test };
            let keys = table.keys.as_ref().expect("key column was read");
            let idx: Vec<usize> = (0..keys.len())
                .filter(|&r| keys[r].as_str() >= lo.as_str() && keys[r].as_str() <= hi.as_str())
                .collect();
            if idx.is_empty() {
                return Err(CliError::data(format!("no rows with key in [{lo}, {hi}]")));
            }
            data.select_rows(&idx)?
        }
    };
    Ok(selected)
}

fn write_graph(run: &mut RunDir, name: &str, g: &UndirectedGraph) -> Result<(), CliError> {
    run.write(name, &g.to_edge_list())
}

fn path_table(results: &[LearnResult], extra: Option<&[String]>) -> String {
    let mut out = String::from("index,penalty,edges,connected");
    if extra.is_some() {
        out.push_str(",valid");
    }
    out.push('\n');
    for (k, r) in results.iter().enumerate() {
        let penalty = r.penalty.map(|v| format!("{v:?}")).unwrap_or_default();
        let _ = write!(out, "{},{penalty},{},{}", k + 1, r.graph.num_edges(), r.connected);
        if let Some(e) = extra {
            let _ = write!(out, ",{}", e[k]);
        }
        out.push('\n');
    }
    out
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let est = estimator(cfg)?;
    let mut run = RunDir::open(&cfg.output_dir)?;
    let x = load_data(cfg, &mut run, Part::Train)?;
    let gamma = emp_vario_joint(&x, &est)?;
    let chi = emp_chi(&x, &est)?;
    let check = check_variogram(&gamma)?;
    let mut report = format!(
        "rows: {}\nvariables: {}\np: {}\nexceedances: {}\nvalid: {}\nmin_eigenvalue: {:e}\n",
        x.nrows(),
        x.ncols(),
        cfg.p,
        est.k(x.nrows()),
        check.valid,
        check.min_eigenvalue
    );
    if let Some(reason) = &check.reason {
        let _ = writeln!(report, "reason: {reason}");
    }
    run.write("gamma.csv", &write_matrix_csv(&gamma))?;
    run.write("chi.csv", &write_matrix_csv(&chi))?;
    run.write("validity.txt", &report)?;
    run.note("valid", json!(check.valid));
    run.finish("estimate", cfg)
}

pub fn learn(cfg: &RunConfig) -> Result<(), CliError> {
    let est = estimator(cfg)?;
    let method = cfg.require(&cfg.method, "method")?.as_str();
    let grid = || -> Result<PenaltyGrid, CliError> {
        let values = cfg.require(&cfg.grid, "grid")?;
        PenaltyGrid::new(values.clone()).map_err(|e| CliError::config(e.to_string()))
    };
    if !matches!(method, "emst" | "eglearn" | "emtp2" | "shift") {
        return Err(CliError::config(format!(
            "unknown method {method:?} (expected emst, eglearn, emtp2 or shift)"
        )));
    }
    let kind = match cfg.weights.as_deref() {
        None | Some("variogram") => WeightKind::Variogram,
        Some("chi") => WeightKind::Chi,
        Some(other) => return Err(CliError::config(format!("unknown weights {other:?}"))),
    };
    let grid = if matches!(method, "eglearn" | "shift") { Some(grid()?) } else { None };
    let mut run = RunDir::open(&cfg.output_dir)?;
    let x = load_data(cfg, &mut run, Part::Train)?;
    match method {
        "emst" => {
            let r = emst(&x, &est, kind)?;
            write_graph(&mut run, "graph.edges", &r.graph)?;
            run.write("path.csv", &path_table(std::slice::from_ref(&r), None))?;
        }
        "eglearn" => {
            let grid = grid.expect("grid checked");
            let path = eglearn_path(&x, &est, &grid)?;
            let votes = eglearn_votes(&x, &est, &grid)?;
            for (k, (r, v)) in path.iter().zip(&votes).enumerate() {
                write_graph(&mut run, &format!("graph_{:03}.edges", k + 1), &r.graph)?;
                run.write(&format!("votes_{:03}.csv", k + 1), &write_matrix_csv(v))?;
            }
            run.write("path.csv", &path_table(&path, None))?;
        }
        "emtp2" => {
            let fit = emtp2_fit(&emp_vario_joint(&x, &est)?)?;
            write_graph(&mut run, "graph.edges", &fit.model.graph)?;
            run.write("gamma.csv", &write_matrix_csv(fit.model.gamma.matrix()))?;
            run.write("theta.csv", &write_matrix_csv(fit.model.theta.matrix()))?;
            let r = unpenalized(&fit.model.graph);
            run.write("path.csv", &path_table(&[r], None))?;
            run.note("kkt_residual", json!(fit.kkt_residual));
            run.note("iterations", json!(fit.iterations));
        }
        "shift" => {
            let grid = grid.expect("grid checked");
            let ghat = emp_vario_joint(&x, &est)?;
            let mut results = Vec::new();
            let mut valid = Vec::new();
            for (k, &lambda) in grid.values().iter().enumerate() {
                let fit = parameter_shift_fit(&ghat, lambda, cfg.shift_c)?;
                write_graph(&mut run, &format!("graph_{:03}.edges", k + 1), &fit.result.graph)?;
                run.write(&format!("theta_{:03}.csv", k + 1), &write_matrix_csv(&fit.theta))?;
                valid.push(fit.valid.to_string());
                results.push(fit.result);
            }
            run.write("path.csv", &path_table(&results, Some(&valid)))?;
        }
        _ => unreachable!(),
    }
    run.note("method", json!(method));
    run.finish("learn", cfg)
}

/// Path-table row for a method without a penalty.
fn unpenalized(g: &UndirectedGraph) -> LearnResult {
    LearnResult {
        graph: g.clone(),
        scores: Vec::new(),
        penalty: None,
        connected: g.is_connected(),
    }
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let graph_path = cfg.require(&cfg.graph, "graph")?;
    if cfg.data.is_some() == cfg.gamma.is_some() {
        return Err(CliError::config("fit needs exactly one of `data` and `gamma`"));
    }
    let est = estimator(cfg)?;
    let mut run = RunDir::open(&cfg.output_dir)?;
    let values = match &cfg.gamma {
        Some(path) => read_matrix_csv(&run.read(path)?)?,
        None => emp_vario_joint(&load_data(cfg, &mut run, Part::Train)?, &est)?,
    };
    let graph = UndirectedGraph::parse_edge_list(&run.read(graph_path)?, Some(values.nrows()))?;
    if !graph.is_connected() {
        return Err(CliError::data("graph is disconnected; HR graphical models need a connected graph"));
    }
    let model = complete_gamma(&PartialVariogram::new(graph, &values)?)?;
    run.write("gamma.csv", &write_matrix_csv(model.gamma.matrix()))?;
    run.write("theta.csv", &write_matrix_csv(model.theta.matrix()))?;
    run.write("chi.csv", &write_matrix_csv(&hr_chi(&model.gamma)))?;
    write_graph(&mut run, "graph.edges", &model.graph)?;
    run.note("max_non_edge_theta", json!(model.max_non_edge_theta()));
    run.finish("fit", cfg)
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let est = estimator(cfg)?;
    let models = cfg.require(&cfg.models, "models")?;
    if models.is_empty() {
        return Err(CliError::config("`models` is empty"));
    }
    let mut run = RunDir::open(&cfg.output_dir)?;
    let x = load_data(cfg, &mut run, Part::Test)?;
    let empirical = emp_chi(&x, &est)?;
    let mut table = String::from("method,edges,score,relative\n");
    let mut scatter = String::from("method,i,j,fitted_chi,empirical_chi\n");
    for m in models {
        let gamma = Variogram::new(read_matrix_csv(&run.read(&m.gamma)?)?)?;
        let graph = UndirectedGraph::parse_edge_list(&run.read(&m.graph)?, Some(gamma.dim()))?;
        let model = FittedModel::from_gamma(graph, gamma, m.name.clone())?;
        let score = evaluate_loglik(&model, &x, &est)?;
        let _ = writeln!(
            table,
            "{},{},{:?},{}",
            m.name,
            model.graph.num_edges(),
            score.score,
            score.is_relative()
        );
        let fitted = hr_chi(&model.gamma);
        for i in 0..model.dim() {
            for j in (i + 1)..model.dim() {
                let _ = writeln!(
                    scatter,
                    "{},{},{},{:?},{:?}",
                    m.name,
                    i + 1,
                    j + 1,
                    fitted[(i, j)],
                    empirical[(i, j)]
                );
            }
        }
    }
    run.write("evaluate.csv", &table)?;
    run.write("chi_scatter.csv", &scatter)?;
    run.finish("evaluate", cfg)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ModelSpec {
    Hr {
        gamma: Vec<Vec<f64>>,
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        /// 1-based root: sample `Y` conditioned on `Y_root > 1`.
        #[serde(default)]
        root: Option<usize>,
    },
    Maxlinear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Recml {
        /// 1-based arcs `[k, i]`.
        dag: Vec<[usize; 2]>,
        weights: RecmlWeights,
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecmlWeights {
    nodes: Vec<f64>,
    /// Aligned with `dag`.
    arcs: Vec<f64>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::data(format!("`{what}` must be a nonempty rectangular array")));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let path = cfg.require(&cfg.model, "model")?;
    let mut run = RunDir::open(&cfg.output_dir)?;
    let text = run.read(path)?;
    let spec: ModelSpec =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let spec_seed = match &spec {
        ModelSpec::Hr { seed, .. } | ModelSpec::Maxlinear { seed, .. } | ModelSpec::Recml { seed, .. } => *seed,
    };
    // command-line/config seed wins over the model file
    let seed = cfg.seed.or(spec_seed).unwrap_or(0);
    let samples = match spec {
        ModelSpec::Hr { gamma, n, root, .. } => {
            let g = Variogram::new(rows_to_matrix(&gamma, "gamma")?)?;
            match root {
                Some(0) => return Err(CliError::data("`root` is 1-based")),
                Some(m) => sample_y_m(&g, m - 1, n, seed)?,
                None => sample_hr_pareto(&g, n, seed)?,
            }
        }
        ModelSpec::Maxlinear { a, n, .. } => sample_max_linear(&MaxLinearCoeff::new(rows_to_matrix(&a, "A")?)?, n, seed)?,
        ModelSpec::Recml {
            dag,
            weights,
            n,
            normalize,
            ..
        } => {
            if weights.arcs.len() != dag.len() {
                return Err(CliError::data("`weights.arcs` must align with `dag`"));
            }
            if dag.iter().flatten().any(|&v| v == 0) {
                return Err(CliError::data("`dag` node labels are 1-based"));
            }
            let arcs: Vec<(usize, usize)> = dag.iter().map(|&[k, i]| (k - 1, i - 1)).collect();
            let d = weights.nodes.len();
            let graph = Dag::from_arcs(d, &arcs)?;
            let weighted: Vec<_> = arcs.iter().copied().zip(weights.arcs.iter().copied()).collect();
            let spec = RecursiveMLSpec::new(graph, weights.nodes, &weighted)?;
            run.note("coefficients", json!(matrix_rows(ml_coefficients(&spec).matrix())));
            sample_recursive_max_linear(&spec, n, seed, normalize)?
        }
    };
    run.write("samples.csv", &write_data_csv(&samples.values, None))?;
    run.note("model_sha256", json!(sha256_hex(text.as_bytes())));
    run.note("effective_seed", json!(seed));
    run.finish("simulate", cfg)
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
