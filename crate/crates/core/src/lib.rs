//! Consistent-histories quantum probability on finite-dimensional Hilbert spaces.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: dense complex kets and operators, tensor products, propagators.
//! * [`properties`]: projectors as quantum properties, sample spaces, the Born rule.
//! * [`histories`]: history families, chain operators, the decoherence matrix,
//!   consistency checks, extended-Born probabilities and conditionals.
//! * [`toymodels`]: discrete-time hopping models with a decaying site and a toy detector.
//! * [`sterngerlach`]: a four-time Stern-Gerlach model with its named families.
//!
//! Index flattening for tensor products is fixed crate-wide: the first factor is
//! the slow index, so basis pair `(i, j)` of `a ⊗ b` sits at `i * dim_b + j`.

pub mod error;
pub mod histories;
pub mod linalg;
pub mod properties;
pub mod sterngerlach;
pub mod tolerance;
pub mod toymodels;

pub use error::{Error, Result};
pub use histories::{
    Condition, ConsistencyReport, DecoherenceMatrix, Event, EventRef, EventSet, History,
    HistoryFamily, HistoryProbability, Node,
};
pub use linalg::{Factor, Ket, Operator, C64};
pub use properties::{Projector, SampleSpace};
pub use tolerance::Tolerances;
