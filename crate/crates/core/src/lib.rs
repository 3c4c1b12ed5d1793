#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod lipschitz;
pub mod models;
pub mod numeric;
pub mod optimizers;

pub use error::{Error, Result};
pub use numeric::{Matrix, Rng, Vector};
