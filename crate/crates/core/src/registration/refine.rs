//! Second-stage pose refinement against a depth map rendered from the coarse pose.

use serde::{Deserialize, Serialize};

use super::pnp::pnp_pose;
use super::{Correspondence2D3D, RansacConfig, RegistrationError};
use crate::camera::CameraPose;
use crate::image::DepthImage;
use crate::Vec2;

/// A pixel in the view rendered from the initial pose matched to a pixel in
/// the acquired photograph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMatch {
    pub rendered: [f64; 2],
    pub acquired: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub pose: CameraPose,
    /// Matches that landed on geometry and became 2D-3D pairs.
    pub used: usize,
    /// Matches dropped because they fell outside the image or on background.
    pub dropped: usize,
    pub inliers: Vec<usize>,
}

/// Lifts each rendered pixel to 3D through `depth` (rendered from `init`) and
/// re-solves the acquired view's pose with PnP.
pub fn refine_pose_with_depth(
    depth: &DepthImage,
    matches: &[PixelMatch],
    init: &CameraPose,
    cfg: &RansacConfig,
) -> Result<RefineResult, RegistrationError> {
    if depth.width != init.width || depth.height != init.height {
        return Err(RegistrationError::Invalid(format!(
            "depth is {}x{}, camera is {}x{}",
            depth.width, depth.height, init.width, init.height
        )));
    }
    let mut corrs = Vec::new();
    let mut dropped = 0;
    for m in matches {
        let (x, y) = (m.rendered[0].round(), m.rendered[1].round());
        if x < 0.0 || y < 0.0 || x >= depth.width as f64 || y >= depth.height as f64 {
            dropped += 1;
            continue;
        }
        let z = depth.get(x as u32, y as u32);
        if !z.is_finite() || z <= 0.0 {
            dropped += 1;
            continue;
        }
        // depth is sampled at pixel centers, so lift the center, not the raw match
        let pc = init.backproject(&Vec2::new(x, y), z);
        let world = init.r.transpose() * (pc - init.t);
        corrs.push(Correspondence2D3D {
            world,
            pixel: Vec2::new(m.acquired[0], m.acquired[1]),
        });
    }
    if corrs.len() < 4 {
        return Err(RegistrationError::TooFewPoints {
            need: 4,
            got: corrs.len(),
        });
    }
    let res = pnp_pose(&corrs, &init.k, (init.width, init.height), cfg)?;
    Ok(RefineResult {
        pose: res.pose,
        used: corrs.len(),
        dropped,
        inliers: res.inliers,
    })
}
