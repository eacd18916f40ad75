//! Diffusion earth mover's distance.

pub mod error;
pub mod gradient;
pub mod graph;
pub mod io;
pub mod lowrank;
pub mod metric;
pub mod multiscale;
pub mod oracle;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result};
