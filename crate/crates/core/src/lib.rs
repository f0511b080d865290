//! Pseudospectral simulation of reaction-diffusion systems on the periodic
//! torus driven by Kraichnan transport noise.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::wrong_self_convention
)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod noise;
pub mod reactions;
pub mod rng;
pub mod snapshot;
pub mod solver;
pub mod torus_field;

pub use error::{KrdError, Result};
