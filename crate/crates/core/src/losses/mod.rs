//! Training losses as pure functions.
//!
//! The estimated cloud passed to [`chamfer_thresholded`] is expected to be
//! treated as a constant (detached) by callers embedding these losses in a
//! differentiable pipeline.

mod chamfer;
mod maps;
mod noise;
mod stage;

pub use chamfer::{
    chamfer_thresholded, nearest_distances, ChamferConfig, ChamferMode, ChamferResult,
};
pub use maps::{heatmap_l2, weighted_l1};
pub use noise::{depth_noise, DepthNoise};
pub use stage::{
    stage_loss, LossBreakdown, LossComponents, LossWeights, SampleDomain, Stage, StageLossSpec,
    TERM_NAMES,
};
