use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("LGL root finder did not converge for degree {degree} after {iterations} iterations")]
    RootFinding { degree: usize, iterations: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid face id {face} for dimension {dim} (expected 1..={max})", max = 2 * dim)]
    InvalidFace { face: usize, dim: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("explicit integration unstable at t = {time:.4e}: energy grew from {initial:.4e} to {current:.4e}")]
    Unstable { time: f64, initial: f64, current: f64 },

    #[error("forcing does not match the time grid: {0}")]
    ForcingMismatch(String),

    #[error("Gramian asymmetry {defect:.3e} exceeds tolerance {tol:.1e}")]
    GramianAsymmetry { defect: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
