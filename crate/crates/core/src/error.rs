use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("equality constraints are rank deficient (rank {rank} < {rows})")]
    DegenerateEqualities { rank: usize, rows: usize },

    /// An iterative method stopped at its cap; `best` is the best iterate found.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("step size too large: more than {max_reflections} reflections in one leapfrog step; reduce the step size")]
    StepSize { max_reflections: usize },

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window of {window} observations exceeds panel length {len}")]
    Window { window: usize, len: usize },

    #[error("asset {0} has zero variance")]
    DegenerateAsset(String),

    #[error("all asset returns are equal; return levels are undefined")]
    DegenerateReturns,

    #[error("behavioral functions produce a zero total weight")]
    DegenerateFunctions,

    #[error("volatility target {target:e} cannot be bracketed on the efficient frontier")]
    NonMonotoneFrontier { target: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible region: {0}")]
    Region(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad user input, as opposed to numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidWeights(_)
                | Error::Ingestion { .. }
                | Error::InsufficientData(_)
                | Error::Window { .. }
                | Error::DegenerateAsset(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
