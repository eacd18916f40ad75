//! Reference computations used to judge embeddings: exact transport, rank statistics and synthetic data.

mod emd;
mod generators;
mod metrics;

pub use emd::*;
pub use generators::*;
pub use metrics::*;
