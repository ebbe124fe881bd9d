#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod discrete;
pub mod error;
pub mod field;
pub mod functional;
pub mod greens;
pub mod interp;
pub mod linalg;
pub mod nonlinearity;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
