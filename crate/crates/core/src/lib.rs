//! Linear and nonlinear Gaussian state estimation.
//!
//! The crate provides the linear Kalman filter and batch least squares,
//! Gaussian identities, the linearized, extended and unscented Kalman
//! filters, and a falling-body radar tracking benchmark that compares the
//! three nonlinear filters by Monte Carlo simulation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ekf;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod kalman;
pub mod linalg;
pub mod models;
pub mod selftest;
pub mod sim;
pub mod ukf;

pub use error::{EstimationError, Result};
pub use filter::{FilterKind, RecursiveFilter};
pub use gaussian::GaussianBelief;
pub use linalg::{Matrix, Vector};
