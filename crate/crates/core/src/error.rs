use thiserror::Error;

pub type Result<T> = std::result::Result<T, MflError>;

#[derive(Debug, Error)]
pub enum MflError {
    #[error("record too short: {samples} axial samples, need at least {required}")]
    RecordTooShort { samples: usize, required: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },

    #[error("image too small: {rows}x{cols}, need at least {min}x{min}")]
    ImageTooSmall { rows: usize, cols: usize, min: usize },

    #[error("layer {rows}x{cols} is smaller than the {kernel}x{kernel} kernel")]
    LayerSmallerThanKernel {
        rows: usize,
        cols: usize,
        kernel: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid synthesis spec: field `{field}`: {reason}")]
    SpecInvalid { field: String, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
