//! Pinhole cameras: intrinsics plus a world-to-camera rigid transform.
//!
//! Camera space follows the computer-vision convention: `+z` looks forward,
//! `+x` right, `+y` down. Pixel centers sit at integer coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Mat3, Vec2, Vec3};

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("invalid camera: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    /// Upper-triangular intrinsics, `k[(2, 2)] == 1`.
    pub k: Mat3,
    /// World-to-camera rotation.
    pub r: Mat3,
    /// World-to-camera translation.
    pub t: Vec3,
    pub width: u32,
    pub height: u32,
}

/// On-disk camera document: row-major `K` and `R`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraJson {
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub width: u32,
    pub height: u32,
}

/// Checks `R^T R = I` and `det R = +1` within [`ROTATION_TOL`].
pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    let orth = (r.transpose() * r - Mat3::identity()).abs().max();
    orth <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Projects a matrix onto SO(3) through its SVD.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fix = u;
        u_fix.column_mut(2).neg_mut();
        r = u_fix * v_t;
    }
    r
}

/// Intrinsics for a symmetric pinhole with vertical field of view `fov_y` (radians).
pub fn intrinsics_from_fov(fov_y: f64, width: u32, height: u32) -> Mat3 {
    let f = 0.5 * height as f64 / (0.5 * fov_y).tan();
    Mat3::new(
        f,
        0.0,
        (width as f64 - 1.0) / 2.0,
        0.0,
        f,
        (height as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    )
}

impl CameraPose {
    pub fn new(k: Mat3, r: Mat3, t: Vec3, width: u32, height: u32) -> Result<Self, CameraError> {
        let cam = Self {
            k,
            r,
            t,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !is_rotation(&self.r, ROTATION_TOL) {
            return Err(CameraError::Invalid(format!(
                "R is not a rotation (det {})",
                self.r.determinant()
            )));
        }
        let k = &self.k;
        if k[(2, 2)] != 1.0 || k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(CameraError::Invalid(
                "K must be upper triangular with K[2][2] = 1".into(),
            ));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(CameraError::Invalid(
                "focal lengths must be positive".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::Invalid("empty resolution".into()));
        }
        if !self.t.iter().all(|v| v.is_finite()) {
            return Err(CameraError::Invalid("translation is not finite".into()));
        }
        Ok(())
    }

    /// Camera looking from `eye` toward `target`; `up` only needs to be non-parallel.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, k: Mat3, width: u32, height: u32) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vec3::x());
        }
        let x = x.normalize();
        // y points down in image space
        let y = z.cross(&x);
        let r = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye);
        Self {
            k,
            r,
            t,
            width,
            height,
        }
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.r.transpose() * self.t)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.r * p + self.t
    }

    /// Pixel position of a camera-space point; `None` behind the camera.
    pub fn project_camera(&self, pc: &Vec3) -> Option<Vec2> {
        if pc.z <= 0.0 {
            return None;
        }
        let h = self.k * pc;
        Some(Vec2::new(h.x / h.z, h.y / h.z))
    }

    pub fn project(&self, p: &Vec3) -> Option<Vec2> {
        self.project_camera(&self.to_camera(p))
    }

    /// Unit world-space direction of the ray through pixel `px`.
    pub fn pixel_ray(&self, px: &Vec2) -> Vec3 {
        let kinv = self.k.try_inverse().expect("invertible intrinsics");
        let dc = kinv * Vec3::new(px.x, px.y, 1.0);
        (self.r.transpose() * dc).normalize()
    }

    /// Camera-space point at depth `z` (along the optical axis) behind pixel `px`.
    pub fn backproject(&self, px: &Vec2, z: f64) -> Vec3 {
        let kinv = self.k.try_inverse().expect("invertible intrinsics");
        kinv * Vec3::new(px.x, px.y, 1.0) * z
    }

    pub fn in_image(&self, px: &Vec2) -> bool {
        px.x >= -0.5
            && px.y >= -0.5
            && px.x < self.width as f64 - 0.5
            && px.y < self.height as f64 - 0.5
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let mut k = self.k;
        k[(0, 0)] *= sx;
        k[(0, 1)] *= sx;
        k[(0, 2)] = (k[(0, 2)] + 0.5) * sx - 0.5;
        k[(1, 1)] *= sy;
        k[(1, 2)] = (k[(1, 2)] + 0.5) * sy - 0.5;
        Self {
            k,
            r: self.r,
            t: self.t,
            width,
            height,
        }
    }

    pub fn to_json(&self) -> CameraJson {
        let row_major = |m: &Mat3| {
            let mut out = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    out[r * 3 + c] = m[(r, c)];
                }
            }
            out
        };
        CameraJson {
            k: row_major(&self.k),
            r: row_major(&self.r),
            t: [self.t.x, self.t.y, self.t.z],
            width: self.width,
            height: self.height,
        }
    }

    pub fn from_json(doc: &CameraJson) -> Result<Self, CameraError> {
        Self::new(
            Mat3::from_row_slice(&doc.k),
            Mat3::from_row_slice(&doc.r),
            Vec3::from_row_slice(&doc.t),
            doc.width,
            doc.height,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        let doc: CameraJson = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_json(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CameraError> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// Loads a JSON array of camera documents.
pub fn load_camera_list(path: impl AsRef<Path>) -> Result<Vec<CameraPose>, CameraError> {
    let docs: Vec<CameraJson> = serde_json::from_slice(&std::fs::read(path)?)?;
    docs.iter().map(CameraPose::from_json).collect()
}

pub fn save_camera_list(cams: &[CameraPose], path: impl AsRef<Path>) -> Result<(), CameraError> {
    let docs: Vec<CameraJson> = cams.iter().map(CameraPose::to_json).collect();
    std::fs::write(path, serde_json::to_vec_pretty(&docs)?)?;
    Ok(())
}

/// Rotation vector (axis * angle) to matrix.
pub fn rodrigues(w: &Vec3) -> Mat3 {
    nalgebra::Rotation3::new(*w).into_inner()
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle_between(a: &Mat3, b: &Mat3) -> f64 {
    let rel = a.transpose() * b;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near zero; use the skew part there
    let s = Vec3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    )
    .norm()
        / 2.0;
    s.atan2(c)
}
