// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod qp;
pub mod sim;
pub mod vfi;

pub use error::{Error, HypothesisError, Result};
