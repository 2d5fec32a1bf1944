use thiserror::Error;

use crate::workspace::ValidationFinding;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Syntax(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid model: {}", format_findings(.0))]
    Validation(Vec<ValidationFinding>),

    #[error("expected {expected} parameters, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no prior given for free parameter `{0}`")]
    MissingPrior(String),

    #[error("improper prior for `{0}`")]
    ImproperPrior(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initial point has zero posterior density")]
    Initialization,

    #[error("non-finite gradient at {0:?}")]
    NonFiniteGradient(Vec<f64>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no thinning factor up to {max_factor} brings |acf| below {band}")]
    NoFiniteThinning { max_factor: usize, band: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("chain has no draws")]
    EmptyChain,

    #[error("chain {index}: {source}")]
    InChain {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration aborted: {failed} of {total} pseudo-experiments failed to sample")]
    CalibrationAborted { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_findings(findings: &[ValidationFinding]) -> String {
    findings
        .iter()
        .map(|f| format!("{} ({})", f.message, f.path))
        .collect::<Vec<_>>()
        .join("; ")
}
