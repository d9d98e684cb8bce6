// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod epidemic;
pub mod error;
pub mod excursion;
pub mod laws;
pub mod levy;
pub mod numeric;
pub mod path;
pub mod rng;
pub mod scale;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
