//! Crate-wide error type.
//!
//! One enum covers the whole pipeline so bulk operations can attach location
//! context while per-element operations stay cheap to call.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GwError {
    #[error("dataset is empty: {0}")]
    EmptyDataset(&'static str),

    #[error("non-finite value in {field} at row {row}, column {col}")]
    NonFiniteValue {
        field: &'static str,
        row: usize,
        col: usize,
    },

    #[error("duplicate variable name {0:?}")]
    DuplicateName(String),

    #[error("variable name at column {0} is empty")]
    EmptyName(usize),

    #[error("geographic coordinate out of range at row {row}: lon {lon}, lat {lat}")]
    GeographicRangeViolation { row: usize, lon: f64, lat: f64 },

    #[error("column {0:?} has zero sample variance")]
    ZeroVariance(String),

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("variable {0:?} selected more than once")]
    DuplicateSelection(String),

    #[error("dependent variable {0:?} also appears among the independents")]
    DependentInIndependents(String),

    #[error("operation requires a dependent variable in the selection")]
    MissingDependent,

    #[error("Minkowski exponent must satisfy p >= 1, got {0}")]
    InvalidPower(f64),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("fixed bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("condition-number threshold must exceed 1, got {0}")]
    InvalidThreshold(f64),

    #[error("adaptive neighbour count {requested} exceeds the {available} available points")]
    AdaptiveCountExceedsN { requested: usize, available: usize },

    #[error("adaptive neighbour count must be at least 1")]
    ZeroNeighbourCount,

    #[error("invalid bandwidth search bounds [{lo}, {hi}]")]
    InvalidSearchBounds { lo: f64, hi: f64 },

    #[error("every bandwidth candidate produced a non-finite score")]
    AllScoresNonFinite,

    #[error("weight vector sums to zero")]
    ZeroWeightSum,

    #[error("quantile probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("degenerate local distribution: {0}")]
    DegenerateLocalDistribution(&'static str),

    #[error("local weighted mean is zero; coefficient of variation undefined")]
    ZeroMean,

    #[error("insufficient local data: need {needed}, have {got}")]
    InsufficientLocalData { needed: usize, got: usize },

    #[error("retained component count {k} out of range for {m} variables")]
    InvalidComponentCount { k: usize, m: usize },

    #[error("singular local covariance{}", fmt_loc(.location))]
    SingularLocalCovariance { location: Option<usize> },

    #[error("all candidate subsets were degenerate (zero-determinant covariance)")]
    DegenerateSubset,

    #[error("singular local fit{} (reciprocal condition {rcond:.3e})", fmt_loc(.location))]
    SingularLocalFit {
        location: Option<usize>,
        rcond: f64,
    },

    #[error("AICc undefined: effective trace {trace_s:.3} too large for n = {n}")]
    AiccUndefined { trace_s: f64, n: usize },

    #[error("too few observations after outlier filtering: kept {kept}, need {needed}")]
    TooFewAfterFilter { kept: usize, needed: usize },

    #[error("design column {col} has zero norm under the local weights{}", fmt_loc(.location))]
    ZeroNormColumn { col: usize, location: Option<usize> },

    #[error("singular local correlation matrix{}", fmt_loc(.location))]
    SingularCorrelationMatrix { location: Option<usize> },

    #[error("distance cache is malformed: {0}")]
    InvalidCacheFormat(String),

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("{op} failed at location {location}: {source}")]
    AtLocation {
        op: &'static str,
        location: usize,
        #[source]
        source: Box<GwError>,
    },
}

fn fmt_loc(location: &Option<usize>) -> String {
    match location {
        Some(i) => format!(" at location {i}"),
        None => String::new(),
    }
}

impl GwError {
    /// Wraps an error with the bulk-operation location it occurred at.
    pub fn at(self, op: &'static str, location: usize) -> Self {
        GwError::AtLocation {
            op,
            location,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for GwError {
    fn from(e: std::io::Error) -> Self {
        GwError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GwError>;
