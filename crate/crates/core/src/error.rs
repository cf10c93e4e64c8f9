use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("inverse Laplacian needs a zero-mean input (mean {mean:e}, max |u| {max_abs:e})")]
    NonZeroMeanInput { mean: f64, max_abs: f64 },

    #[error("surface tensions must be strictly positive and finite, got ({0}, {1}, {2})")]
    NonPositiveTension(f64, f64, f64),

    #[error("spreading coefficient Σ{index} is zero")]
    ZeroSpreadingCoefficient { index: usize },

    #[error("F + B = {value:e} is below the quadratization floor{}", cell.map(|c| format!(" at cell {c}")).unwrap_or_default())]
    QuadratizationFloor { value: f64, cell: Option<usize> },

    #[error("total spreading: the tension triangle does not close, no finite contact angles")]
    TotalSpreading,

    #[error("spreading coefficients are not admissible: {0}")]
    NotAdmissible(String),

    #[error("two-level scheme called without a previous time level")]
    MissingHistory,

    #[error("PCG did not converge in {iterations} iterations (relative residual {relative_residual:e})")]
    SolverDiverged { iterations: usize, relative_residual: f64 },

    #[error("initial phases leave the hyperplane c1+c2+c3=1 (max error {max_err:e})")]
    HyperplaneViolation { max_err: f64 },

    #[error("invariant violated at step {step}: {what}")]
    InvariantViolation { step: usize, what: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Runtime failures (solver, invariants) as opposed to bad input.
    pub fn is_runtime(&self) -> bool {
        if let Error::AtStep { source, .. } = self {
            return source.is_runtime();
        }
        matches!(
            self,
            Error::SolverDiverged { .. }
                | Error::InvariantViolation { .. }
                | Error::QuadratizationFloor { .. }
                | Error::NonZeroMeanInput { .. }
                | Error::Io(_)
        )
    }
}
