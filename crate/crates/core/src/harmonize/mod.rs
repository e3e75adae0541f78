//! Latent mean shift, edge-ring fusion and the candidate loop.

mod ops;
mod pipeline;
mod task;

pub use ops::{
    channel_means, edge_mask, edge_width, edge_width_with_fraction, fuse_step, latent_mean_shift, EDGE_WIDTH_FRACTION,
};
pub use pipeline::{
    compose, compose_with, select_best, Candidate, CandidateSet, CodecConfig, HarmonizeConfig, PredictorConfig,
    PreparedComposition, FALLBACK_SCORE,
};
pub use task::{place, CompositionTask, Placement};
