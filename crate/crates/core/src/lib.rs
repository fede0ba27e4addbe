#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod geometry;
pub mod harness;
pub(crate) mod linalg;
pub mod loss;
pub mod objective;
pub mod optim;
pub mod validation;

pub use error::{Error, Result};
