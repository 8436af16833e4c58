//! Linear two-view triangulation.

use nalgebra::Matrix4;

use super::RegistrationError;
use crate::camera::CameraPose;
use crate::{Mat3, Vec2, Vec3};

/// Rays closer than this to parallel (sine of the angle between them) carry no depth.
const PARALLEL_SIN: f64 = 1e-10;

/// DLT on calibrated image coordinates `y = K^-1 x` for views `[r0 | t0]`, `[r1 | t1]`.
pub(crate) fn triangulate_normalized(
    y0: &Vec2,
    y1: &Vec2,
    r0: &Mat3,
    t0: &Vec3,
    r1: &Mat3,
    t1: &Vec3,
) -> Result<Vec3, RegistrationError> {
    let d0 = r0.transpose() * Vec3::new(y0.x, y0.y, 1.0);
    let d1 = r1.transpose() * Vec3::new(y1.x, y1.y, 1.0);
    if d0.normalize().cross(&d1.normalize()).norm() < PARALLEL_SIN {
        return Err(RegistrationError::ParallelRays);
    }
    let mut a = Matrix4::<f64>::zeros();
    for (k, (y, r, t)) in [(y0, r0, t0), (y1, r1, t1)].into_iter().enumerate() {
        for (row, coord) in [(0usize, y.x), (1, y.y)] {
            for c in 0..3 {
                a[(2 * k + row, c)] = coord * r[(2, c)] - r[(row, c)];
            }
            a[(2 * k + row, 3)] = coord * t.z - t[row];
        }
    }
    // rows are scale-free; equalize them so no view dominates
    for i in 0..4 {
        let n = a.row(i).norm();
        if n > 0.0 {
            a.row_mut(i).scale_mut(1.0 / n);
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("svd v_t");
    let (min_i, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let h = v_t.row(min_i);
    let scale = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if h[3].abs() <= 1e-12 * scale {
        return Err(RegistrationError::ParallelRays);
    }
    let x = Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    if !x.iter().all(|v| v.is_finite()) {
        return Err(RegistrationError::ParallelRays);
    }
    Ok(x)
}

/// World point seen at pixel `x0` in `pose0` and `x1` in `pose1`.
pub fn triangulate(
    x0: &Vec2,
    x1: &Vec2,
    pose0: &CameraPose,
    pose1: &CameraPose,
) -> Result<Vec3, RegistrationError> {
    let norm = |pose: &CameraPose, x: &Vec2| {
        let h = pose.k.try_inverse().expect("invertible intrinsics") * Vec3::new(x.x, x.y, 1.0);
        Vec2::new(h.x / h.z, h.y / h.z)
    };
    if (pose0.center() - pose1.center()).norm() == 0.0 {
        return Err(RegistrationError::Degenerate("zero baseline".into()));
    }
    triangulate_normalized(
        &norm(pose0, x0),
        &norm(pose1, x1),
        &pose0.r,
        &pose0.t,
        &pose1.r,
        &pose1.t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::intrinsics_from_fov;

    fn pair() -> (CameraPose, CameraPose) {
        let k = intrinsics_from_fov(0.8, 320, 240);
        let a = CameraPose::look_at(
            Vec3::new(0.0, -4.0, 0.5),
            Vec3::zeros(),
            Vec3::z(),
            k,
            320,
            240,
        );
        let b = CameraPose::look_at(
            Vec3::new(2.0, -3.5, 0.8),
            Vec3::zeros(),
            Vec3::z(),
            k,
            320,
            240,
        );
        (a, b)
    }

    #[test]
    fn round_trip_exact() {
        let (a, b) = pair();
        for p in [
            Vec3::new(0.3, 0.2, -0.1),
            Vec3::new(-0.5, 0.4, 0.6),
            Vec3::zeros(),
        ] {
            let x = triangulate(&a.project(&p).unwrap(), &b.project(&p).unwrap(), &a, &b).unwrap();
            assert!((x - p).norm() < 1e-8, "{x} vs {p}");
        }
    }

    #[test]
    fn point_at_infinity_is_an_error() {
        let (a, b) = pair();
        let dir = Vec3::new(0.1, 1.0, 0.05).normalize();
        let px = |c: &CameraPose| c.project_camera(&(c.r * dir)).unwrap();
        let r = triangulate(&px(&a), &px(&b), &a, &b);
        assert!(matches!(r, Err(RegistrationError::ParallelRays)), "{r:?}");
    }

    #[test]
    fn coincident_centers_are_rejected() {
        let (a, _) = pair();
        let p = Vec3::new(0.1, 0.0, 0.0);
        let x = a.project(&p).unwrap();
        assert!(triangulate(&x, &x, &a, &a).is_err());
    }
}
