use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is numerically zero: all eigenvalues below tolerance")]
    DegenerateMatrix,

    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid variogram: {0}")]
    InvalidVariogram(String),

    #[error("invalid precision matrix: {0}")]
    InvalidPrecision(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("graph structure: {0}")]
    Structure(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("no spanning tree: weight graph is disconnected")]
    NoSpanningTree,

    #[error("{0} is outside the domain of the function")]
    Domain(String),

    #[error("degenerate margin: column {0} has fewer than two distinct values")]
    DegenerateMargin(usize),

    #[error("estimator configuration: {0}")]
    Config(String),

    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True for failures caused by an iterative solver running out of budget.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}
