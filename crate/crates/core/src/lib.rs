//! Event-triggered global robust practical output regulation for nonlinear
//! systems in output feedback form.
//!
//! The pipeline: an [`exogen::InternalModel`] is synthesized from the
//! steady-state generator, a sampled-output observer and a backstepping law
//! ([`regulation`]) produce the held input, and [`trigger`] decides when the
//! output is resampled. [`hybridsim::simulate`] runs the closed loop.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod exogen;
pub mod hybridsim;
pub mod matlib;
pub mod plant;
pub mod regulation;
pub mod report;
pub mod scenario;
pub mod trigger;

pub use error::{Error, Result};
