//! Pose from three 2D-3D correspondences.
//!
//! With the camera at `P` and unit bearings `a`, `b`, `c` toward the world
//! points `A`, `B`, `C`, the law of cosines ties the unknown distances
//! `x = |PA|`, `y = |PB|`, `z = |PC|` to the known side lengths:
//!
//! ```text
//! y² + z² - 2yz cos α = |BC|²     cos α = b·c
//! x² + z² - 2xz cos β = |AC|²     cos β = a·c
//! x² + y² - 2xy cos γ = |AB|²     cos γ = a·b
//! ```
//!
//! Substituting `y = ux`, `z = vx` and eliminating `u` leaves a quartic in
//! `v`, whose roots are taken as eigenvalues of its companion matrix.

use nalgebra::{DMatrix, Matrix3};

use super::RegistrationError;
use crate::camera::{is_rotation, CameraPose};
use crate::{Mat3, Vec2, Vec3};

/// Largest accepted reprojection error of the three defining points, in pixels.
pub(crate) const P3P_REPROJ_TOL: f64 = 1e-6;

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

/// Evaluates `c[0] + c[1] v + ...` and its derivative.
fn poly_eval(c: &[f64], v: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ci in c.iter().rev() {
        dp = dp * v + p;
        p = p * v + ci;
    }
    (p, dp)
}

/// Real roots of a polynomial given in ascending coefficient order.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let mut roots = Vec::new();
    for z in comp.complex_eigenvalues().iter() {
        // near-double roots come back as a conjugate pair with a tiny imaginary part
        if z.im.abs() > 1e-6 * (1.0 + z.re.abs()) {
            continue;
        }
        let mut v = z.re;
        for _ in 0..20 {
            let (p, dp) = poly_eval(&coeffs[..=deg], v);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            v -= step;
            if step.abs() <= 1e-16 * (1.0 + v.abs()) {
                break;
            }
        }
        roots.push(v);
    }
    roots
}

/// Newton iterations on the three distance equations.
fn polish(d: Vec3, cos: [f64; 3], sq: [f64; 3]) -> Vec3 {
    let [ca, cb, cg] = cos;
    let residual = |d: &Vec3| {
        let (x, y, z) = (d.x, d.y, d.z);
        Vec3::new(
            y * y + z * z - 2.0 * y * z * ca - sq[0],
            x * x + z * z - 2.0 * x * z * cb - sq[1],
            x * x + y * y - 2.0 * x * y * cg - sq[2],
        )
    };
    let mut d = d;
    let mut r = residual(&d);
    for _ in 0..8 {
        let (x, y, z) = (d.x, d.y, d.z);
        let j = Matrix3::new(
            0.0,
            2.0 * y - 2.0 * z * ca,
            2.0 * z - 2.0 * y * ca,
            2.0 * x - 2.0 * z * cb,
            0.0,
            2.0 * z - 2.0 * x * cb,
            2.0 * x - 2.0 * y * cg,
            2.0 * y - 2.0 * x * cg,
            0.0,
        );
        let Some(step) = j.lu().solve(&r) else {
            break;
        };
        let next = d - step;
        let rn = residual(&next);
        if !(rn.norm() < r.norm()) {
            break;
        }
        d = next;
        r = rn;
    }
    d
}

/// Rigid `(R, t)` with `cam[i] ≈ R world[i] + t` (orthogonal Procrustes).
pub(crate) fn rigid_align(world: &[Vec3], cam: &[Vec3]) -> (Mat3, Vec3) {
    let n = world.len() as f64;
    let cw = world.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cc = cam.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Mat3::zeros();
    for (w, c) in world.iter().zip(cam) {
        h += (w - cw) * (c - cc).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let s = if (v * u.transpose()).determinant() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let r = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, s)) * u.transpose();
    (r, cc - r * cw)
}

/// All camera poses consistent with three world points and their pixels.
/// The returned poses carry `k` and a `1 x 1` placeholder resolution.
pub fn solve_p3p(
    points: &[Vec3; 3],
    pixels: &[Vec2; 3],
    k: &Mat3,
) -> Result<Vec<CameraPose>, RegistrationError> {
    let [pa, pb, pc] = *points;
    let ab = (pb - pa).norm();
    let ac = (pc - pa).norm();
    let bc = (pc - pb).norm();
    let span = ab.max(ac).max(bc);
    if span == 0.0 || (pb - pa).cross(&(pc - pa)).norm() <= 1e-10 * span * span {
        return Err(RegistrationError::Collinear);
    }
    let kinv = k
        .try_inverse()
        .ok_or_else(|| RegistrationError::Invalid("singular intrinsics".into()))?;
    let bearing = |x: &Vec2| (kinv * Vec3::new(x.x, x.y, 1.0)).normalize();
    let (a, b, c) = (
        bearing(&pixels[0]),
        bearing(&pixels[1]),
        bearing(&pixels[2]),
    );
    let cos_a = b.dot(&c);
    let cos_b = a.dot(&c);
    let cos_g = a.dot(&b);
    let k1 = bc * bc / (ac * ac);
    let k2 = ab * ab / (ac * ac);

    // q(v) = v² - 2v cos β + 1; u = N(v) / D(v)
    let q = [1.0, -2.0 * cos_b, 1.0];
    let n = poly_add(&poly_scale(&q, k1 - k2), &[1.0, 0.0, -1.0]);
    let d = [2.0 * cos_g, -2.0 * cos_a];
    // u² - 2u cos γ + 1 - K2 q(v) = 0, multiplied through by D²
    let one_minus = poly_add(&[1.0], &poly_scale(&q, -k2));
    let quartic = poly_add(
        &poly_add(
            &poly_mul(&n, &n),
            &poly_scale(&poly_mul(&n, &d), -2.0 * cos_g),
        ),
        &poly_mul(&one_minus, &poly_mul(&d, &d)),
    );

    let mut uv = Vec::new();
    for v in real_roots(&quartic) {
        let (qv, _) = poly_eval(&q, v);
        let (nv, _) = poly_eval(&n, v);
        let (dv, _) = poly_eval(&d, v);
        if dv.abs() > 1e-10 {
            uv.push((nv / dv, v));
        } else {
            // D vanishes: u comes from the quadratic directly
            let disc = cos_g * cos_g - (1.0 - k2 * qv);
            if disc >= 0.0 {
                uv.push((cos_g + disc.sqrt(), v));
                uv.push((cos_g - disc.sqrt(), v));
            }
        }
    }

    let sq = [bc * bc, ac * ac, ab * ab];
    let mut poses: Vec<CameraPose> = Vec::new();
    for (u, v) in uv {
        if !(u > 0.0 && v > 0.0) {
            continue;
        }
        let (qv, _) = poly_eval(&q, v);
        if qv <= 0.0 {
            continue;
        }
        let x = (ac * ac / qv).sqrt();
        let dist = polish(Vec3::new(x, u * x, v * x), [cos_a, cos_b, cos_g], sq);
        if !(dist.min() > 0.0) {
            continue;
        }
        let cam = [a * dist.x, b * dist.y, c * dist.z];
        let (r, t) = rigid_align(points, &cam);
        if !is_rotation(&r, 1e-9) {
            continue;
        }
        let pose = CameraPose {
            k: *k,
            r,
            t,
            width: 1,
            height: 1,
        };
        let ok = points.iter().zip(pixels).all(|(p, x)| {
            pose.project(p)
                .is_some_and(|y| (y - x).norm() <= P3P_REPROJ_TOL)
        });
        let duplicate = poses
            .iter()
            .any(|o| (o.r - r).norm() < 1e-9 && (o.t - t).norm() < 1e-9 * (1.0 + t.norm()));
        if ok && !duplicate {
            poses.push(pose);
        }
    }
    if poses.is_empty() {
        return Err(RegistrationError::NoRealRoots);
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{intrinsics_from_fov, rotation_angle_between};

    fn k() -> Mat3 {
        intrinsics_from_fov(0.9, 640, 480)
    }

    fn check(truth: &CameraPose, pts: [Vec3; 3]) -> Vec<CameraPose> {
        let px = pts.map(|p| truth.project(&p).unwrap());
        let sols = solve_p3p(&pts, &px, &truth.k).unwrap();
        for s in &sols {
            for (p, x) in pts.iter().zip(&px) {
                assert!((s.project(p).unwrap() - x).norm() <= 1e-6);
            }
        }
        sols
    }

    #[test]
    fn ground_truth_among_solutions() {
        let truth = CameraPose::look_at(
            Vec3::new(1.0, -5.0, 2.0),
            Vec3::zeros(),
            Vec3::z(),
            k(),
            640,
            480,
        );
        let pts = [
            Vec3::new(0.5, 0.2, 0.1),
            Vec3::new(-0.6, 0.1, 0.4),
            Vec3::new(0.1, -0.3, -0.7),
        ];
        let sols = check(&truth, pts);
        let best = sols
            .iter()
            .map(|s| rotation_angle_between(&s.r, &truth.r).max((s.t - truth.t).norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "{best}");
    }

    #[test]
    fn symmetric_configuration_has_several_solutions() {
        // equilateral triangle seen from its axis admits more than one pose
        let pts = [0.0f64, 2.0, 4.0].map(|i| {
            let a = i * std::f64::consts::PI / 3.0;
            Vec3::new(a.cos(), a.sin(), 0.0)
        });
        let truth = CameraPose::look_at(
            Vec3::new(0.0, 0.0, 1.5),
            Vec3::zeros(),
            Vec3::y(),
            k(),
            640,
            480,
        );
        let sols = check(&truth, pts);
        assert!(sols.len() >= 2, "{}", sols.len());
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        let px = [
            Vec2::new(1.0, 2.0),
            Vec2::new(3.0, 4.0),
            Vec2::new(5.0, 6.0),
        ];
        assert!(matches!(
            solve_p3p(&pts, &px, &k()),
            Err(RegistrationError::Collinear)
        ));
    }

    #[test]
    fn random_poses_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let eye = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-6.0..-3.0),
                rng.random_range(-2.0..2.0),
            );
            let truth = CameraPose::look_at(eye, Vec3::zeros(), Vec3::z(), k(), 640, 480);
            let pts = [(); 3].map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            });
            let sols = check(&truth, pts);
            let best = sols
                .iter()
                .map(|s| rotation_angle_between(&s.r, &truth.r).max((s.t - truth.t).norm()))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{best}");
        }
    }
}
