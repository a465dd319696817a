//! Data-driven distributionally robust upper bounds for uncertain mixed
//! 0-1 linear programs over 2-Wasserstein balls.

pub mod bound;
pub mod calibrate;
pub mod cones;
pub mod experiments;
mod error;
pub mod model;
pub mod transport;

pub use error::{Error, Result};
pub use wasscopos_solver::{SolverOptions, Status};
