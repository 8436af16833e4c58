//! Brute-force ray casting against every face of a mesh.
//!
//! Slow on purpose: it shares no code with the rasterizer and serves as the
//! reference that z-buffer visibility is checked against.

use crate::camera::CameraPose;
use crate::mesh::Mesh;
use crate::{Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub face: u32,
    /// Ray parameter; equals the distance when the direction is unit length.
    pub t: f64,
    /// Barycentric weights of face corners 1 and 2.
    pub u: f64,
    pub v: f64,
}

/// Möller–Trumbore intersection, two-sided. Returns `(t, u, v)`.
pub fn intersect_triangle(orig: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = orig - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    Some((t, u, v))
}

/// Nearest hit with `t > t_min`; equal distances resolve to the lower face id.
pub fn first_hit(mesh: &Mesh, orig: &Vec3, dir: &Vec3, t_min: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for f in 0..mesh.face_count() {
        let tri = mesh.face_vertices(f);
        if let Some((t, u, v)) = intersect_triangle(orig, dir, &tri) {
            if t > t_min && best.is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    face: f as u32,
                    t,
                    u,
                    v,
                });
            }
        }
    }
    best
}

/// Face seen through pixel `px` of `cam`, and its camera-space depth.
pub fn pixel_hit(mesh: &Mesh, cam: &CameraPose, px: &Vec2) -> Option<(u32, f64)> {
    let c = cam.center();
    let dir = cam.pixel_ray(px);
    let hit = first_hit(mesh, &c, &dir, 0.0)?;
    let z = cam.to_camera(&(c + dir * hit.t)).z;
    Some((hit.face, z))
}

/// Whether the segment from the camera center to `vertex` is blocked by a face
/// not incident to that vertex.
pub fn vertex_occluded(mesh: &Mesh, cam: &CameraPose, vertex: usize) -> bool {
    let c = cam.center();
    let p = mesh.positions()[vertex];
    let dir = p - c;
    let v = vertex as u32;
    mesh.faces().iter().enumerate().any(|(f, face)| {
        if face.contains(&v) {
            return false;
        }
        matches!(
            intersect_triangle(&c, &dir, &mesh.face_vertices(f)),
            Some((t, _, _)) if t > 0.0 && t < 1.0 - 1e-9
        )
    })
}

/// Ray-cast vertex visibility: inside the image, in front of the camera and unoccluded.
pub fn vertex_visible(mesh: &Mesh, cam: &CameraPose, vertex: usize) -> bool {
    let p = mesh.positions()[vertex];
    match cam.project(&p) {
        Some(px) if cam.in_image(&px) && cam.to_camera(&p).z > crate::renderer::NEAR => {
            !vertex_occluded(mesh, cam, vertex)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_triangle_center() {
        let tri = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        ];
        let (t, u, v) = intersect_triangle(&Vec3::new(0.25, 0.25, 0.0), &Vec3::z(), &tri).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!((u - 0.25).abs() < 1e-15 && (v - 0.25).abs() < 1e-15);
        assert!(intersect_triangle(&Vec3::new(0.8, 0.8, 0.0), &Vec3::z(), &tri).is_none());
    }
}
