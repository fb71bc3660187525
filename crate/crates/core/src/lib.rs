//! Simulation and analysis of two mechanically coupled arrays of
//! optomechanical self-oscillators.

pub mod analysis;
pub mod config;
pub mod continuum;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod phase_model;
pub mod sweep;

pub use error::{Error, Result};
