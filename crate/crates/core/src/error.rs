use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} values for the declared shape, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("row {row} has zero Euclidean norm")]
    ZeroNormRow { row: usize },
    #[error("label {label} at row {row} is outside 0..{classes}")]
    LabelOutOfRange {
        row: usize,
        label: u32,
        classes: u32,
    },
    #[error("{found} labels supplied for {rows} rows")]
    LabelCountMismatch { rows: usize, found: usize },
    #[error("class {class} has {count} members, at least 2 are required")]
    ClassTooSmall { class: u32, count: usize },
    #[error("at least {required} classes are required, found {found}")]
    TooFewClasses { required: u32, found: u32 },
    #[error("shrinkage scale must be finite and non-negative, got {0}")]
    InvalidShrinkage(f64),
    #[error("covariance is singular even after shrinkage")]
    SingularCovariance,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} is outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("score vector is empty")]
    EmptyScores,
    #[error("target rate must lie in (0, 1], got {0}")]
    InvalidRate(f64),
    #[error("no anchor in the batch has a positive pair")]
    NoPositivePairs,
    #[error("batch needs at least {required} samples, got {found}")]
    BatchTooSmall { required: usize, found: usize },
    #[error("centroid of class {class} has zero norm")]
    DegenerateCentroid { class: u32 },
    #[error("invalid mixture spec: {0}")]
    InvalidSpec(&'static str),
    #[error("input is empty")]
    EmptyInput,
    #[error("rebalance exponent must lie in [0, 1], got {0}")]
    InvalidExponent(f64),
}

impl Error {
    /// True for failures of the numerical procedure itself rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCovariance | Error::DegenerateCentroid { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
