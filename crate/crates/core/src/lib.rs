//! Simulation of stochastic Volterra equations driven by pure-jump
//! space–time Lévy noise.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod jump_fields;
pub mod kernel;
pub mod levy_measure;
pub mod manifest;
pub mod quadrature;
pub mod rng;
pub mod run;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
