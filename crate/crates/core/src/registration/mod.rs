//! Camera registration from given correspondences.
//!
//! Two views are bootstrapped through the essential matrix, further views are
//! placed with P3P inside RANSAC, and everything is polished by bundle
//! adjustment. A second stage refines a coarse pose by matching against a depth
//! map rendered from that pose.

mod bundle;
mod essential;
mod io;
mod p3p;
mod pnp;
mod refine;
mod triangulate;

pub use bundle::{bundle_adjust, dense_jacobian, BaConfig, BaResult, Observation, ReconState};
pub use essential::{
    decompose_essential, eight_point, estimate_essential, sampson_distance, EssentialEstimate,
    RelativePose,
};
pub use io::{load_json, save_json, MatchFile, PairFile, PointFile};
pub use p3p::solve_p3p;
pub use pnp::{pnp_pose, refine_pose_lm, reprojection_error, PnpResult};
pub use refine::{refine_pose_with_depth, PixelMatch, RefineResult};
pub use triangulate::triangulate;

use thiserror::Error;

use crate::Vec2;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("need at least {need} correspondences, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("cheirality tie: {0} points in front for two candidates")]
    CheiralityTie(usize),
    #[error("rays are parallel; the point cannot be triangulated")]
    ParallelRays,
    #[error("world points are collinear")]
    Collinear,
    #[error("no real solution")]
    NoRealRoots,
    #[error("RANSAC found no consensus ({0} inliers)")]
    NoConsensus(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Two pixels seeing the same scene point in views `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D2D {
    pub x0: Vec2,
    pub x1: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D3D {
    pub world: Vec3,
    pub pixel: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Inlier threshold in pixels (Sampson distance or reprojection error).
    pub threshold: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            confidence: 0.999,
            max_iterations: 10_000,
            seed: 0,
        }
    }
}

/// Iterations needed to draw one all-inlier sample of size `s` with the
/// configured confidence, given inlier ratio `w`.
pub(crate) fn ransac_iterations(cfg: &RansacConfig, w: f64, s: i32) -> usize {
    let ws = w.powi(s);
    if ws >= 1.0 {
        return 1;
    }
    if ws <= 0.0 {
        return cfg.max_iterations;
    }
    let n = (1.0 - cfg.confidence).ln() / (1.0 - ws).ln();
    (n.ceil() as usize).clamp(1, cfg.max_iterations)
}
