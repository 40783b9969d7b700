use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("target {index} not on grid")]
    OffGrid { index: usize },

    #[error("targets {first} and {second} share grid point {block}")]
    DuplicateGridPoint {
        first: usize,
        second: usize,
        block: usize,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate column {column} (norm {norm:e})")]
    DegenerateColumn { column: usize, norm: f64 },

    #[error("infeasible problem (max constraint violation {max_violation:e})")]
    Infeasible { max_violation: f64 },

    #[error("unbounded problem")]
    Unbounded,

    #[error("solver failed after {iterations} iterations: primal residual {primal:e}, dual residual {dual:e}")]
    SolverFailure {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),

    #[error("scenario hash mismatch: file was built for {expected}, current scenario is {found}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{method} at {axis_value}, trial {trial}: {source}")]
    Trial {
        method: String,
        axis_value: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
