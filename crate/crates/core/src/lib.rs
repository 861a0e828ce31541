//! Simulation and verification laboratory for degenerate branching particle
//! systems driven by anisotropic stable motion.

pub mod branching_sim;
pub mod cli;
pub mod error;
pub mod fluctuation;
pub mod limit_constants;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod special;
pub mod stable_motion;
pub mod stats;
pub mod test_function;
pub mod verify_harness;

pub use error::{Error, Result};
