use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver, mesh, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("sparse Cholesky factorization failed: {0}")]
    Factorization(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("side shared by more than two elements: {0:?}")]
    NonManifold(Vec<usize>),

    #[error("negative weight {value} on element {element}")]
    NegativeWeight { element: usize, value: f64 },

    #[error("unsupported quadrature order {0} (supported: 1..=5)")]
    UnsupportedQuadrature(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient flow stopped after {steps} steps with residual {residual:.3e} (target {target:.3e})")]
    FlowNotConverged {
        steps: usize,
        residual: f64,
        target: f64,
        energy_trace: Vec<f64>,
    },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("PGM parse error at byte {offset}: {message}")]
    Pgm { offset: usize, message: String },

    #[error("CSV parse error on line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
