//! Disconnection-aware attack detection and isolation for networked
//! linear time-invariant systems.

// `!(x > 0.0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod distflow;
pub mod error;
pub mod isolation;
pub mod lti;
pub mod netsys;
pub mod resgen;
pub mod riccati;
pub mod scenario;

pub use error::{Error, Result};
pub use lti::{SignalTrace, StateSpace};
