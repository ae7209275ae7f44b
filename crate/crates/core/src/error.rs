use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit. Variants map one-to-one onto the
/// failure classes of the public operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("label collision: `{0}` would appear twice in the result")]
    LabelCollision(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("oracle scale error: full contraction limited to L <= {max}, got L = {got}")]
    OracleScale { max: usize, got: usize },

    #[error("index error: qubit {qubit} out of range for {n_qubits} qubits")]
    Index { qubit: usize, n_qubits: usize },

    #[error("label error: class {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("schedule error: step {t} exceeds cycle length {period}")]
    Schedule { t: usize, period: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("range error: value {value} at row {row}, column {column} is outside (-1, 1)")]
    Range { row: usize, column: usize, value: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("training diverged at step {step} (last good epoch: {last_good_epoch:?})")]
    Diverged {
        step: usize,
        last_good_epoch: Option<usize>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (flags, config, file
    /// formats) rather than by a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Format(_) | Error::Range { .. } | Error::Label { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
