use thiserror::Error;

/// Errors raised by the model, the optimizer and the scenario loader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution [{lo}, {hi}] min exceeds the time grid [{grid_lo}, {grid_hi}) min")]
    HorizonOverflow {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("degenerate triangular distribution (lo={lo}, mode={mode}, hi={hi})")]
    DegenerateSpec { lo: f64, mode: f64, hi: f64 },

    #[error("probability mass sums to {sum}, expected 1")]
    Normalization { sum: f64 },

    #[error("flight {flight}: target at waypoint {waypoint} violates its feasible interval: {detail}")]
    ConstraintViolation {
        flight: String,
        waypoint: usize,
        detail: String,
    },

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("{n} flights exceed the direct-method cap of {cap}; use the FFT method")]
    SizeCap { n: usize, cap: usize },

    #[error("genome has {got} genes, scenario expects {expected}")]
    GenomeLength { got: usize, expected: usize },

    #[error("evaluation failed at generation {generation}: {source}")]
    Evaluation {
        generation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid scenario: {0}")]
    Schema(String),

    #[error("unsupported file version {found} (supported: {supported})")]
    UnknownVersion { found: u32, supported: u32 },

    #[error("unknown {kind} '{id}'")]
    UnknownId { kind: &'static str, id: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short name used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::HorizonOverflow { .. } => "horizon_overflow",
            Error::DegenerateSpec { .. } => "degenerate_spec",
            Error::Normalization { .. } => "normalization",
            Error::ConstraintViolation { .. } => "constraint_violation",
            Error::ModelInconsistency(_) => "model_inconsistency",
            Error::SizeCap { .. } => "size_cap",
            Error::GenomeLength { .. } => "genome_length",
            Error::Evaluation { .. } => "evaluation",
            Error::Schema(_) => "schema",
            Error::UnknownVersion { .. } => "unknown_version",
            Error::UnknownId { .. } => "unknown_id",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
