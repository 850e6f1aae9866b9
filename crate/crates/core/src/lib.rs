//! Kronecker-structured robust PCA for through-the-wall radar imaging.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod forward;
pub mod linalg;
pub mod manifest;
pub mod matrix_file;
pub mod montecarlo;
pub mod noise;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
