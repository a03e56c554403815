//! Numerical laboratory for the stochastic transport equation
//! `du + b . grad u dt + grad u o dB = 0` via its pathwise representation
//! `u(t, x) = v(t, x - B_t)`, where `v` solves a deterministic transport
//! problem with the Brownian-shifted drift `b(t, x + B_t)`.

pub mod config;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod field;
pub mod path;
pub mod profile;
pub mod spde;
pub mod transport;
pub mod weak;

pub use error::{Error, Result};
