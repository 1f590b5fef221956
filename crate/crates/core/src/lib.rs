//! Spectral numerics for `−Δ + a/|x|²` on spherical-harmonic sectors.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod hankel;
pub mod linalg;
pub mod localization;
pub mod operator;
pub mod profiles;
pub mod quad;
pub mod radial;
pub mod specfun;

pub use error::{Error, Result};
