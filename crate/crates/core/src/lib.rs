//! Adaptive Bayesian quadrature with weak-greedy certificates.
//!
//! The crate is organised bottom-up: [`domain`] and [`kernels`] describe the
//! problem, [`gp`] conditions the latent Gaussian process, [`acquisition`]
//! scores candidate points, [`engine`] runs the sequential loop, and
//! [`analysis`] checks the run against the theory (projection identity,
//! weak-greedy ratios, error bound, convergence rates). [`harness`] turns
//! JSON experiment configs into trace and report artifacts.

pub mod acquisition;
pub mod analysis;
pub mod domain;
pub mod engine;
pub mod error;
pub mod exec;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod real;
pub mod transforms;

pub use error::{AbqError, Result};
pub use real::{Mp, Precision, Real};
