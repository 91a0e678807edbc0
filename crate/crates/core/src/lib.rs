//! Mean-variance portfolio selection when variance follows a Volterra
//! square-root dynamic with a memory kernel.
//!
//! The crate is organized bottom-up: `kernels` holds the kernel catalog,
//! special functions, convolution weights, and resolvents; `volterra_solver`
//! integrates the quadratic Volterra equations driving the value function;
//! `portfolio` assembles optimal strategies and the efficient frontier;
//! `simulate` provides Monte Carlo schemes for the state and wealth paths;
//! `oracle` carries slow reference implementations used to cross-check the
//! fast paths; `cli` backs the command-line binary.

pub mod cli;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod oracle;
pub mod portfolio;
pub mod simulate;
pub mod volterra_solver;

pub use error::{Error, Result};
pub use grid::Grid;
