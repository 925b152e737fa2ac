//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure must contain at least one atom")]
    EmptyMeasure,
    #[error("points and weights have different lengths ({points} vs {weights})")]
    LengthMismatch { points: usize, weights: usize },
    #[error("negative weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weights sum to zero")]
    ZeroTotalWeight,
    #[error("non-finite coordinate encountered")]
    NonFiniteCoordinate,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires one-dimensional measures, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("quantile level {0} outside (0, 1]")]
    QuantileOutOfRange(f64),
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("columns do not form an orthogonal frame (max residual {0:e})")]
    NotOrthogonal(f64),
    #[error("sampler of kind {kind} cannot produce {requested}")]
    SamplerKindMismatch {
        kind: &'static str,
        requested: &'static str,
    },
    #[error("fixed-list sampler is empty")]
    EmptyFixedList,
    #[error("sample count must be at least 1")]
    ZeroSampleCount,
    #[error("slice count j={j} outside 1..={n}")]
    SliceCountOutOfRange { j: usize, n: usize },
    #[error("step size {0} outside [0, 1]")]
    GammaOutOfRange(f64),
    #[error("custom schedule exhausted at index {0}")]
    ScheduleExhausted(usize),
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("trajectory does not retain per-step measures; rerun with diagnostics.retain_measures")]
    MeasuresNotRetained,
    #[error("step index {k} outside 1..={max}")]
    StepIndexOutOfRange { k: usize, max: usize },
    #[error("instance with {atoms} atoms exceeds the oracle cap of {cap}")]
    OracleCapExceeded { atoms: usize, cap: usize },
    #[error("transport simplex failed to certify optimality (residual {0:e})")]
    OracleNotCertified(f64),
    #[error("image has no positive pixel")]
    ZeroImage,
    #[error("sampled conversion requires a sample count")]
    MissingSampleCount,
    #[error("image is not 8-bit grayscale: {0}")]
    NotGrayscale(String),
    #[error("malformed {format} input: {detail}")]
    MalformedInput {
        format: &'static str,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
