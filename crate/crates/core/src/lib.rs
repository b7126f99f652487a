// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cocycle;
pub mod equation;
pub mod error;
pub mod geometry;
pub mod model;
pub mod poly;
pub mod qlaplace;
pub mod qcore;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
