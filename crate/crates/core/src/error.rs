use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("at least 2 classes are required, found {0}")]
    TooFewClasses(usize),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("negative frequency {value} at position {index}")]
    NegativeFrequency { index: usize, value: f64 },

    #[error("frequencies sum to {0}, not 1")]
    NotNormalized(f64),

    #[error("class counts are all zero")]
    EmptyCounts,

    #[error("effort weight {value} at position {index} is not a positive finite number")]
    InvalidWeight { index: usize, value: f64 },

    #[error("unknown weight preset `{0}`")]
    UnknownPreset(String),

    #[error("population has no strata")]
    NoStrata,

    #[error("duplicate stratum `{0}`")]
    DuplicateStratum(String),

    #[error("stratum `{stratum}`: class counts sum to {sum}, expected total is {expected}")]
    RowSumMismatch {
        stratum: String,
        sum: u64,
        expected: u64,
    },

    #[error("stratum `{0}`: expected total must be positive")]
    ZeroTotal(String),

    #[error("aggregate `{aggregate}`: unknown stratum `{stratum}`")]
    UnknownStratum { aggregate: String, stratum: String },

    #[error("aggregate `{aggregate}`: demand {demand} in stratum `{stratum}` exceeds population {available}")]
    OverDemand {
        aggregate: String,
        stratum: String,
        demand: u64,
        available: u64,
    },

    #[error("aggregate `{aggregate}`: observed products total {observed}, demand totals {demand}")]
    ObservedTotalMismatch {
        aggregate: String,
        observed: u64,
        demand: u64,
    },

    #[error("aggregate `{0}` has no observed outcomes")]
    MissingObserved(String),

    #[error("aggregate `{0}` demands no products")]
    EmptyAggregate(String),

    #[error("class scores must be finite, within [0, 1] and strictly decreasing")]
    InvalidScale,

    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("enumeration needs {size} configurations, cap is {cap}; use Monte Carlo")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("R score undefined: reference mean score is zero")]
    UndefinedRScore,

    #[error("{what}: {left} entries vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
}
