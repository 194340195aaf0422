//! Estimation, warping, composites, metrics and the synthetic sweeps.

mod metrics;
mod pipeline;
mod render;
pub mod sweep;
mod warp;

pub use metrics::{model_rmse, ncm};
pub use pipeline::{
    should_swap, ImageFeatures, Pipeline, Registration, RegistrationReport, StageCounts, StageTimings,
};
pub use render::{render, RenderMode};
pub use sweep::{sweep_intensity, sweep_rotation, sweep_scale, SweepRow};
pub use warp::{resize_area, warp};

pub use crate::transform::{fit_affine_points, AffineModel};

use crate::error::Result;
use crate::harris::Keypoint;
use crate::matching::MatchSet;

/// Least-squares affine model of matched keypoints, sensed to reference.
pub fn fit_affine(matches: &MatchSet, kref: &[Keypoint], ksen: &[Keypoint]) -> Result<AffineModel> {
    let (src, dst) = matches.points(kref, ksen);
    fit_affine_points(&src, &dst)
}
