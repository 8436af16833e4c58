//! Essential matrix estimation and decomposition.

use nalgebra::{DMatrix, Matrix3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::triangulate::triangulate_normalized;
use super::{ransac_iterations, Correspondence2D2D, RansacConfig, RegistrationError};
use crate::{Mat3, Vec2, Vec3};

/// Ratio `sigma_8 / sigma_1` of the 8-point design matrix below which the
/// null space is not one-dimensional.
const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EssentialEstimate {
    pub e: Mat3,
    /// Indices of the inlier correspondences, ascending.
    pub inliers: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RelativePose {
    pub r: Mat3,
    /// Unit-length translation of view 1 relative to view 0.
    pub t: Vec3,
    /// Points in front of both cameras for each of the four candidates
    /// `(U W V^T, +u3), (U W V^T, -u3), (U W^T V^T, +u3), (U W^T V^T, -u3)`.
    pub front_counts: [usize; 4],
    pub chosen: usize,
}

fn normalized(k: &Mat3, x: &Vec2) -> Vec2 {
    let kinv = k.try_inverse().expect("invertible intrinsics");
    let h = kinv * Vec3::new(x.x, x.y, 1.0);
    Vec2::new(h.x / h.z, h.y / h.z)
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn hartley(points: &[Vec2]) -> Mat3 {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let d = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if d > 0.0 { 2f64.sqrt() / d } else { 1.0 };
    Mat3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn apply(t: &Mat3, p: &Vec2) -> Vec2 {
    let h = t * Vec3::new(p.x, p.y, 1.0);
    Vec2::new(h.x / h.z, h.y / h.z)
}

/// Projects onto the essential manifold: singular values `(s, s, 0)`.
fn to_essential(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let s = (svd.singular_values[0] + svd.singular_values[1]) / 2.0;
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    u * Mat3::from_diagonal(&Vec3::new(s, s, 0.0)) * v_t
}

/// Normalized 8-point solve on calibrated coordinates `y0`, `y1` (at least 8 pairs).
pub fn eight_point(y0: &[Vec2], y1: &[Vec2]) -> Result<Mat3, RegistrationError> {
    let n = y0.len();
    if n < 8 {
        return Err(RegistrationError::TooFewPoints { need: 8, got: n });
    }
    let t0 = hartley(y0);
    let t1 = hartley(y1);
    // pad to at least 9 rows so the SVD yields the full right singular basis
    let mut a = DMatrix::<f64>::zeros(n.max(9), 9);
    for i in 0..n {
        let p = apply(&t0, &y0[i]);
        let q = apply(&t1, &y1[i]);
        let row = [
            q.x * p.x,
            q.x * p.y,
            q.x,
            q.y * p.x,
            q.y * p.y,
            q.y,
            p.x,
            p.y,
            1.0,
        ];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = |k: usize| svd.singular_values[order[k]];
    if sv(7) <= DEGENERACY_RATIO * sv(0) {
        return Err(RegistrationError::Degenerate(
            "epipolar system has more than one solution (no baseline or planar structure)".into(),
        ));
    }
    let v_t = svd.v_t.unwrap();
    let null = v_t.row(order[8]);
    let f = Mat3::from_row_slice(&null.iter().copied().collect::<Vec<_>>());
    let e = t1.transpose() * f * t0;
    let e = to_essential(&e);
    Ok(e / e.norm())
}

/// Sampson distance, in pixels, of a correspondence to the epipolar geometry `f`.
pub fn sampson_distance(f: &Mat3, c: &Correspondence2D2D) -> f64 {
    let x0 = Vec3::new(c.x0.x, c.x0.y, 1.0);
    let x1 = Vec3::new(c.x1.x, c.x1.y, 1.0);
    let fx0 = f * x0;
    let ftx1 = f.transpose() * x1;
    let num = x1.dot(&fx0);
    let den = fx0.x * fx0.x + fx0.y * fx0.y + ftx1.x * ftx1.x + ftx1.y * ftx1.y;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    num.abs() / den.sqrt()
}

fn fundamental(e: &Mat3, k0: &Mat3, k1: &Mat3) -> Mat3 {
    let k0i = k0.try_inverse().unwrap();
    let k1i = k1.try_inverse().unwrap();
    k1i.transpose() * e * k0i
}

fn score(f: &Mat3, corrs: &[Correspondence2D2D], thr: f64) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut err = 0.0;
    for (i, c) in corrs.iter().enumerate() {
        let d = sampson_distance(f, c);
        if d < thr {
            inliers.push(i);
            err += d;
        }
    }
    (inliers, err)
}

/// RANSAC over normalized 8-point fits, scored by Sampson distance, followed
/// by least-squares refits on the inlier set until it stops changing.
pub fn estimate_essential(
    corrs: &[Correspondence2D2D],
    k0: &Mat3,
    k1: &Mat3,
    cfg: &RansacConfig,
) -> Result<EssentialEstimate, RegistrationError> {
    let n = corrs.len();
    if n < 8 {
        return Err(RegistrationError::TooFewPoints { need: 8, got: n });
    }
    let y0: Vec<Vec2> = corrs.iter().map(|c| normalized(k0, &c.x0)).collect();
    let y1: Vec<Vec2> = corrs.iter().map(|c| normalized(k1, &c.x1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut needed = cfg.max_iterations;
    let mut it = 0;
    let mut fits = 0;
    while it < needed.min(cfg.max_iterations) {
        it += 1;
        let idx = sample(&mut rng, n, 8).into_vec();
        let s0: Vec<Vec2> = idx.iter().map(|&i| y0[i]).collect();
        let s1: Vec<Vec2> = idx.iter().map(|&i| y1[i]).collect();
        let Ok(e) = eight_point(&s0, &s1) else {
            continue;
        };
        fits += 1;
        let (inl, err) = score(&fundamental(&e, k0, k1), corrs, cfg.threshold);
        let better = match &best {
            None => true,
            Some((b, berr)) => inl.len() > b.len() || (inl.len() == b.len() && err < *berr),
        };
        if better {
            needed = ransac_iterations(cfg, inl.len() as f64 / n as f64, 8);
            best = Some((inl, err));
        }
    }
    if fits == 0 {
        return Err(RegistrationError::Degenerate(
            "every minimal sample was degenerate".into(),
        ));
    }
    let (mut inliers, _) = best.unwrap();
    if inliers.len() < 8 {
        return Err(RegistrationError::NoConsensus(inliers.len()));
    }
    let mut e = Mat3::zeros();
    for _ in 0..10 {
        let s0: Vec<Vec2> = inliers.iter().map(|&i| y0[i]).collect();
        let s1: Vec<Vec2> = inliers.iter().map(|&i| y1[i]).collect();
        e = eight_point(&s0, &s1)?;
        let (next, _) = score(&fundamental(&e, k0, k1), corrs, cfg.threshold);
        if next == inliers || next.len() < 8 {
            break;
        }
        inliers = next;
    }
    Ok(EssentialEstimate { e, inliers })
}

/// Picks the `(R, t)` candidate that puts the most triangulated inliers in
/// front of both cameras.
pub fn decompose_essential(
    e: &Mat3,
    corrs: &[Correspondence2D2D],
    k0: &Mat3,
    k1: &Mat3,
) -> Result<RelativePose, RegistrationError> {
    if corrs.is_empty() {
        return Err(RegistrationError::TooFewPoints { need: 1, got: 0 });
    }
    let svd = e.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut v_t = svd.v_t.unwrap();
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let ra = u * w * v_t;
    let rb = u * w.transpose() * v_t;
    let t = u.column(2).into_owned().normalize();
    let candidates = [(ra, t), (ra, -t), (rb, t), (rb, -t)];
    let y: Vec<(Vec2, Vec2)> = corrs
        .iter()
        .map(|c| (normalized(k0, &c.x0), normalized(k1, &c.x1)))
        .collect();
    let mut front_counts = [0usize; 4];
    for (ci, (r, t)) in candidates.iter().enumerate() {
        for (p0, p1) in &y {
            if let Ok(x) = triangulate_normalized(p0, p1, &Mat3::identity(), &Vec3::zeros(), r, t) {
                let z1 = (r * x + t).z;
                if x.z > 0.0 && z1 > 0.0 {
                    front_counts[ci] += 1;
                }
            }
        }
    }
    let chosen = (0..4)
        .max_by_key(|&i| (front_counts[i], std::cmp::Reverse(i)))
        .unwrap();
    let best = front_counts[chosen];
    if (0..4).any(|i| i != chosen && front_counts[i] == best) {
        return Err(RegistrationError::CheiralityTie(best));
    }
    let (r, t) = candidates[chosen];
    Ok(RelativePose {
        r,
        t,
        front_counts,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{intrinsics_from_fov, rotation_angle_between, CameraPose};
    use rand::Rng;

    fn views() -> (CameraPose, CameraPose) {
        let k = intrinsics_from_fov(0.9, 640, 480);
        let a = CameraPose::look_at(
            Vec3::new(0.0, -5.0, 1.0),
            Vec3::zeros(),
            Vec3::z(),
            k,
            640,
            480,
        );
        let b = CameraPose::look_at(
            Vec3::new(2.5, -4.5, 1.5),
            Vec3::zeros(),
            Vec3::z(),
            k,
            640,
            480,
        );
        (a, b)
    }

    fn matches(a: &CameraPose, b: &CameraPose, n: usize, seed: u64) -> Vec<Correspondence2D2D> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                Correspondence2D2D {
                    x0: a.project(&p).unwrap(),
                    x1: b.project(&p).unwrap(),
                }
            })
            .collect()
    }

    /// Relative motion taking view-0 camera coordinates to view 1.
    fn relative(a: &CameraPose, b: &CameraPose) -> (Mat3, Vec3) {
        let r = b.r * a.r.transpose();
        (r, b.t - r * a.t)
    }

    #[test]
    fn noise_free_pair() {
        let (a, b) = views();
        let corrs = matches(&a, &b, 30, 1);
        let est = estimate_essential(&corrs, &a.k, &b.k, &RansacConfig::default()).unwrap();
        assert_eq!(est.inliers.len(), 30);
        let f = fundamental(&est.e, &a.k, &b.k);
        for c in &corrs {
            let r = Vec3::new(c.x1.x, c.x1.y, 1.0).dot(&(f * Vec3::new(c.x0.x, c.x0.y, 1.0)));
            assert!(r.abs() < 1e-9, "{r}");
        }
        let sv = est.e.svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(f64::total_cmp);
        assert!(s[0] < 1e-12 && (s[1] - s[2]).abs() < 1e-12);

        let rel = decompose_essential(&est.e, &corrs, &a.k, &b.k).unwrap();
        let (r, t) = relative(&a, &b);
        assert!(rotation_angle_between(&rel.r, &r) < 1e-6);
        assert!((rel.t - t.normalize()).norm() < 1e-6);
        for (i, &count) in rel.front_counts.iter().enumerate() {
            if i != rel.chosen {
                assert!(count < rel.front_counts[rel.chosen]);
            }
        }
    }

    #[test]
    fn pure_lateral_translation() {
        let k = intrinsics_from_fov(0.9, 640, 480);
        let a = CameraPose::look_at(
            Vec3::new(0.0, -5.0, 0.0),
            Vec3::zeros(),
            Vec3::z(),
            k,
            640,
            480,
        );
        let mut b = a.clone();
        b.t += Vec3::new(-1.0, 0.0, 0.0);
        let corrs = matches(&a, &b, 30, 2);
        let est = estimate_essential(&corrs, &k, &k, &RansacConfig::default()).unwrap();
        let rel = decompose_essential(&est.e, &corrs, &k, &k).unwrap();
        assert!((rel.r - Mat3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn planted_outliers_are_exactly_rejected() {
        let (a, b) = views();
        let mut corrs = matches(&a, &b, 30, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for c in corrs.iter_mut().take(10) {
            c.x1 += Vec2::new(rng.random_range(20.0..60.0), rng.random_range(-60.0..-20.0));
        }
        let est = estimate_essential(&corrs, &a.k, &b.k, &RansacConfig::default()).unwrap();
        assert_eq!(est.inliers, (10..30).collect::<Vec<_>>());
    }

    #[test]
    fn identical_views_are_degenerate() {
        let (a, _) = views();
        let corrs = matches(&a, &a, 30, 5);
        let r = estimate_essential(&corrs, &a.k, &a.k, &RansacConfig::default());
        assert!(matches!(r, Err(RegistrationError::Degenerate(_))), "{r:?}");
    }

    #[test]
    fn too_few_points() {
        let (a, b) = views();
        let corrs = matches(&a, &b, 7, 6);
        assert!(matches!(
            estimate_essential(&corrs, &a.k, &b.k, &RansacConfig::default()),
            Err(RegistrationError::TooFewPoints { need: 8, got: 7 })
        ));
    }
}
