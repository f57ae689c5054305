//! Replica conditional sequential Monte Carlo for state-space smoothing.
//!
//! The crate provides the iterated cSMC kernel, the replica variant in which
//! each chain's auxiliary targets are informed by the other chains' states
//! through a backward information filter estimate, exact Kalman machinery
//! for linear-Gaussian ground truth, benchmark models, and an experiment
//! harness with deterministic seeding.
//!
//! With the default `parallel` feature the particle loops run on rayon;
//! disabling it gives a sequential build with bitwise-identical output.

pub mod csmc;
pub mod diag;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod kalman;
pub mod models;
pub mod par;
pub mod replica;
pub mod ssm;

pub use error::{Error, Result};
