//! Online correlative information maximization for blind source separation.

// Negated comparisons such as `!(x > 0.0)` are used so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod domains;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod ldmi;
pub mod linalg;
pub mod metrics;
pub mod verify;

pub use error::{Error, Result};
