//! Surface light field toolkit.
//!
//! A surface light field stores, for every surface point `(u, v)` and every
//! outgoing direction `(dx, dy, dz)`, the radiance leaving that point. This
//! crate compresses one into a small fully-connected network that predicts the
//! view-dependent residual on top of a per-vertex diffuse color, and carries the
//! machinery around it:
//!
//! - [`synth`]: analytic Phong scenes, camera rigs and captured sample sets.
//! - [`preprocess`]: diffuse/residual separation, reflected-direction transform,
//!   occlusion culling, training tuple encoding.
//! - [`network`]: the two-stream network, Bernoulli-KL loss, backprop, Adam,
//!   training loop, gradient checking and the `DNET` weight format.
//! - [`registration`]: essential matrix, triangulation, P3P/PnP, bundle
//!   adjustment and depth-assisted pose refinement.
//! - [`remesh`]: gradient-consistency superpixels and face splitting along
//!   superpixel boundaries.
//! - [`renderer`]: CPU rasterizer, back-face culling, per-vertex network
//!   shading, depth rendering.
//! - [`metrics`] and [`evaluate`]: masked PSNR/SSIM, compression rate and the
//!   held-out viewpoint comparison harness.

pub mod camera;
pub mod dataset;
pub mod evaluate;
pub mod image;
pub mod mesh;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod raycast;
pub mod registration;
pub mod remesh;
pub mod renderer;
pub mod synth;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Normalizes `v`, returning `None` for zero or non-finite vectors.
pub fn try_normalize(v: &Vec3) -> Option<Vec3> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
