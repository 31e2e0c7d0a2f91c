//! Extremal graphical models.
//!
//! Hüsler–Reiss parameter maps and completion live in [`hr`], data-driven
//! tail estimators in [`estimators`], graph learning in [`structure`] and
//! exact samplers in [`simulation`].

pub mod error;
pub mod estimators;
pub mod graph;
pub mod hr;
pub mod io;
mod laplacian;
pub mod linalg;
pub mod simulation;
pub mod structure;

pub use error::{Error, Result};
pub use estimators::{
    emp_chi, emp_vario_joint, emp_vario_m, evaluate_loglik, rank_pareto_transform, DataMatrix,
    EstimatorConfig, LoglikScore,
};
pub use graph::{minimum_spanning_tree, Dag, UndirectedGraph, WeightedEdge};
pub use hr::{
    complete_gamma, complete_tree_blockgraph, gamma_to_theta, hr_chi, surrogate_loglik,
    theta_to_gamma, FittedModel, PartialVariogram, Precision, Variogram,
};
pub use linalg::Matrix;
pub use simulation::{MaxLinearCoeff, RecursiveMLSpec, SampleMatrix};
pub use structure::{LearnResult, PenaltyGrid, WeightKind};
