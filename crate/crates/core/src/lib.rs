//! Bayesian inference for a spatio-temporal self-exciting point process.
//!
//! Events arrive in the plane over time. Their conditional intensity is a
//! smooth Gaussian-kernel background plus a sum of triggering kernels with
//! exponential decay in time and Gaussian spread in space. The crate provides
//! the log-likelihood with interchangeable compute backends (serial,
//! lane-vectorized, multi-threaded), adaptive Metropolis-Hastings sampling,
//! posterior excitation probabilities, a cluster-process simulator, MCMC
//! diagnostics and file formats.

pub mod backend;
pub mod bench;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod excitation;
pub mod io;
pub mod lanes;
pub mod likelihood;
pub mod model;
pub mod sampler;
pub mod simulator;
pub mod validate;

pub use backend::{Backend, BackendKind};
pub use error::{Error, Result};
pub use model::{Event, EventSet, Params};
