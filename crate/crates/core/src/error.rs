use thiserror::Error;

use crate::histories::ConsistencyReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kind mismatch: cannot combine a {left} with a {right}")]
    KindMismatch {
        left: &'static str,
        right: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |A - A†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max |A†A - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("operator is not a projector: {0}")]
    NotProjector(String),

    #[error("ket is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("zero vector has no associated ray")]
    ZeroVector,

    #[error("empty sample space")]
    EmptySampleSpace,

    #[error("not a decomposition of the identity: {0}")]
    NotDecomposition(String),

    /// Two properties (or families) that do not commute were combined.
    #[error("incompatible: {left} and {right} do not commute{}", time_suffix(*.time))]
    Incompatible {
        time: Option<usize>,
        left: String,
        right: String,
    },

    #[error("invalid history family: {0}")]
    InvalidFamily(String),

    #[error("family is inconsistent: {0}")]
    Inconsistent(Box<ConsistencyReport>),

    #[error("cannot condition on an event of probability {probability:.3e}")]
    NullConditioning { probability: f64 },

    #[error("event {label}@t{time} does not occur in this family")]
    UnknownEvent { label: String, time: usize },

    #[error("unknown family {0:?}")]
    UnknownFamily(String),

    #[error("probability {value} outside [0, 1] beyond tolerance")]
    ProbabilityOutOfRange { value: f64 },

    #[error("parameters out of range: {0}")]
    OutOfRange(String),
}

fn time_suffix(time: Option<usize>) -> String {
    match time {
        Some(t) => format!(" at t{t}"),
        None => String::new(),
    }
}
