//! Simulator of a neuromorphic localization pipeline: velocity-tuned theta
//! oscillators with mismatch, a logic-interference vector-cell network, and
//! a place-cell grid performing path integration.

pub mod chip_io;
pub mod error;
pub mod harness;
pub mod place_grid;
pub mod theta_core;
pub mod vector_net;

pub use error::{Error, Result};
