//! Crate-wide error type.
//!
//! Numerical routines return `f64::INFINITY` for genuinely infinite values
//! (an infinite divergence is an answer, not a failure); `Error` is reserved
//! for contract violations: dimension mismatches, unsupported combinations,
//! exhausted data, non-convergent numerics, malformed configs and IO.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("uniform noise closed forms are defined only in dimension 1 (got {dim})")]
    UniformNeedsDim1 { dim: usize },

    #[error("no exact one-dimensional form for {divergence} under {noise} noise")]
    NoExactForm {
        divergence: &'static str,
        noise: &'static str,
    },

    #[error(
        "quadrature did not converge after {refinements} refinements (last delta {last_delta:e})"
    )]
    QuadratureDidNotConverge { refinements: usize, last_delta: f64 },

    #[error("estimator needs at least 2 samples (got {got})")]
    TooFewSamples { got: usize },

    #[error("sample set rows must share one dimension: row {row} has {got}, expected {expected}")]
    RaggedSamples {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("assumption {assumption} does not imply a sub-Gaussian constant")]
    NoSubGaussianConstant { assumption: &'static str },

    #[error("{divergence} bound requires the {required} loss assumption (got {got})")]
    AssumptionMismatch {
        divergence: &'static str,
        required: &'static str,
        got: &'static str,
    },

    #[error("single-pass sampling exhausted: {needed} examples needed, {available} available")]
    DataExhausted { needed: usize, available: usize },

    #[error("with-replacement partition needs n divisible by the batch size (n={n}, b={b})")]
    UnevenPartition { n: usize, b: usize },

    #[error("{context}: trajectory was recorded without the `{stat}` statistic")]
    MissingStatistic {
        context: &'static str,
        stat: &'static str,
    },

    #[error("bound requires a {required} schedule: {detail}")]
    ScheduleMismatch {
        required: &'static str,
        detail: String,
    },

    #[error("bound requires {required} noise (record has {got})")]
    NoiseMismatch {
        required: &'static str,
        got: &'static str,
    },

    #[error("train and test sets overlap: shared example id {id}")]
    OverlappingSplits { id: u64 },

    #[error("label corruption needs at least 2 classes")]
    CorruptionNeedsClasses,

    #[error("csv parse error at {path}:{line}: {detail}")]
    CsvParse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Serialize as a single machine-readable JSON line (used by the CLI on
    /// failure so scripts can parse stderr).
    pub fn to_json_line(&self) -> String {
        let kind = match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UniformNeedsDim1 { .. } => "uniform_needs_dim1",
            Error::NoExactForm { .. } => "no_exact_form",
            Error::QuadratureDidNotConverge { .. } => "quadrature_did_not_converge",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::RaggedSamples { .. } => "ragged_samples",
            Error::NoSubGaussianConstant { .. } => "no_subgaussian_constant",
            Error::AssumptionMismatch { .. } => "assumption_mismatch",
            Error::DataExhausted { .. } => "data_exhausted",
            Error::UnevenPartition { .. } => "uneven_partition",
            Error::MissingStatistic { .. } => "missing_statistic",
            Error::ScheduleMismatch { .. } => "schedule_mismatch",
            Error::NoiseMismatch { .. } => "noise_mismatch",
            Error::OverlappingSplits { .. } => "overlapping_splits",
            Error::CorruptionNeedsClasses => "corruption_needs_classes",
            Error::CsvParse { .. } => "csv_parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        };
        serde_json::json!({ "error": kind, "detail": self.to_string() }).to_string()
    }
}
