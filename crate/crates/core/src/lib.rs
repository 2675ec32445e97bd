//! Two-membranes and obstacle problems for nonlocal operators of fractional order.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod frequency;
pub mod grid_kernel;
pub mod io;
pub mod linalg;
pub mod obstacle;
pub mod quadrature;
pub mod solver;
pub mod suite;

pub use error::{Error, Result};
