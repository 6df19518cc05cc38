use thiserror::Error;

/// Errors produced by the varorbit pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("U(t_{node}) is not symmetric (max asymmetry {asymmetry:.3e})")]
    NonSymmetric { node: usize, asymmetry: f64 },

    #[error("symmetric eigensolver did not converge (off-diagonal residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("missing hypothesis constant `{0}`")]
    MissingConstant(&'static str),

    #[error("parameter domain violation: {0}")]
    ParameterDomain(String),

    #[error("subspace Z_{k} is not contained in E+ (need k >= n_bar + 1 = {})", n_bar + 1)]
    OutsidePlusSpace { k: usize, n_bar: usize },

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("shooting oracle failed: {0}")]
    Oracle(String),

    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
