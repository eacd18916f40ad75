//! Interpolative decompositions, rank estimates, the reduced-basis diffusion
//! engine and post-hoc subsampling of scale stacks.

mod embedding;
mod id;
mod randomized;
mod rank;
mod subsample;

pub use embedding::{id_diffusion_embedding, scale_rank, IdDiffusion};
pub use id::{interpolative_decomposition, IdFactors};
pub use randomized::{randomized_id, SketchOperator, SymmetricPower};
pub use rank::{approximate_rank, RankEntry, RankProfile};
pub use subsample::subsample_embedding;
