//! Robust pose from many 2D-3D correspondences.

use nalgebra::{Matrix2x3, Matrix6, SMatrix, Vector6};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::p3p::solve_p3p;
use super::{ransac_iterations, Correspondence2D3D, RansacConfig, RegistrationError};
use crate::camera::{nearest_rotation, rodrigues, CameraPose};
use crate::{Mat3, Vec2, Vec3};

#[derive(Debug, Clone)]
pub struct PnpResult {
    pub pose: CameraPose,
    /// Indices of correspondences reprojecting within the threshold, ascending.
    pub inliers: Vec<usize>,
    /// RMS reprojection error over the inliers, in pixels.
    pub rms: f64,
}

/// Pixel distance between the projection of `c.world` and `c.pixel`;
/// infinite for points behind the camera.
pub fn reprojection_error(pose: &CameraPose, c: &Correspondence2D3D) -> f64 {
    match pose.project(&c.world) {
        Some(x) => (x - c.pixel).norm(),
        None => f64::INFINITY,
    }
}

fn inliers_of(pose: &CameraPose, corrs: &[Correspondence2D3D], thr: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut err = 0.0;
    for (i, c) in corrs.iter().enumerate() {
        let e = reprojection_error(pose, c);
        if e < thr {
            idx.push(i);
            err += e * e;
        }
    }
    (idx, err)
}

/// Residual `projection - pixel` and its Jacobian with respect to the camera-space point.
pub(crate) fn projection_jacobian(k: &Mat3, pc: &Vec3) -> Matrix2x3<f64> {
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let (fx, s, fy) = (k[(0, 0)], k[(0, 1)], k[(1, 1)]);
    let iz = 1.0 / z;
    Matrix2x3::new(
        fx * iz,
        s * iz,
        -(fx * x + s * y) * iz * iz,
        0.0,
        fy * iz,
        -fy * y * iz * iz,
    )
}

fn project(k: &Mat3, pc: &Vec3) -> Vec2 {
    let h = k * pc;
    Vec2::new(h.x / h.z, h.y / h.z)
}

/// Skew matrix with `skew(a) b = a x b`.
pub(crate) fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

fn sum_sq(pose: &CameraPose, corrs: &[Correspondence2D3D]) -> f64 {
    corrs
        .iter()
        .map(|c| {
            let pc = pose.to_camera(&c.world);
            if pc.z <= 0.0 {
                return f64::INFINITY;
            }
            (project(&pose.k, &pc) - c.pixel).norm_squared()
        })
        .sum()
}

/// Levenberg-Marquardt on the reprojection error of `corrs`. Rotation updates
/// are applied on the left, `R <- exp([w]) R`.
pub fn refine_pose_lm(
    pose: &CameraPose,
    corrs: &[Correspondence2D3D],
    max_iterations: usize,
) -> CameraPose {
    let mut pose = pose.clone();
    let mut cost = sum_sq(&pose, corrs);
    if !cost.is_finite() || corrs.len() < 3 {
        return pose;
    }
    let mut lambda = 1e-3;
    for _ in 0..max_iterations {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for c in corrs {
            let rx = pose.r * c.world;
            let pc = rx + pose.t;
            let r = project(&pose.k, &pc) - c.pixel;
            let dp = projection_jacobian(&pose.k, &pc);
            let mut j = SMatrix::<f64, 2, 6>::zeros();
            j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dp * -skew(&rx)));
            j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dp);
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        if jtr.amax() < 1e-14 {
            break;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..6 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let w = Vec3::new(delta[0], delta[1], delta[2]);
            let dt = Vec3::new(delta[3], delta[4], delta[5]);
            let mut cand = pose.clone();
            cand.r = nearest_rotation(&(rodrigues(&w) * pose.r));
            cand.t = pose.t + dt;
            let c2 = sum_sq(&cand, corrs);
            if c2 < cost {
                let small = delta.norm() < 1e-15 * (1.0 + pose.t.norm());
                pose = cand;
                cost = c2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    pose
}

/// P3P inside RANSAC, then LM on the consensus set. The inlier set is
/// recomputed after refinement until it stops changing.
pub fn pnp_pose(
    corrs: &[Correspondence2D3D],
    k: &Mat3,
    resolution: (u32, u32),
    cfg: &RansacConfig,
) -> Result<PnpResult, RegistrationError> {
    let n = corrs.len();
    if n < 4 {
        return Err(RegistrationError::TooFewPoints { need: 4, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(CameraPose, Vec<usize>, f64)> = None;
    let mut needed = cfg.max_iterations;
    let mut it = 0;
    while it < needed.min(cfg.max_iterations) {
        it += 1;
        let idx = sample(&mut rng, n, 3).into_vec();
        let pts = [
            corrs[idx[0]].world,
            corrs[idx[1]].world,
            corrs[idx[2]].world,
        ];
        let px = [
            corrs[idx[0]].pixel,
            corrs[idx[1]].pixel,
            corrs[idx[2]].pixel,
        ];
        let Ok(sols) = solve_p3p(&pts, &px, k) else {
            continue;
        };
        for pose in sols {
            let (inl, err) = inliers_of(&pose, corrs, cfg.threshold);
            let better = match &best {
                None => inl.len() >= 4,
                Some((_, b, berr)) => inl.len() > b.len() || (inl.len() == b.len() && err < *berr),
            };
            if better {
                needed = ransac_iterations(cfg, inl.len() as f64 / n as f64, 3);
                best = Some((pose, inl, err));
            }
        }
    }
    let Some((mut pose, mut inliers, _)) = best else {
        return Err(RegistrationError::NoConsensus(0));
    };
    for _ in 0..5 {
        let subset: Vec<Correspondence2D3D> = inliers.iter().map(|&i| corrs[i]).collect();
        pose = refine_pose_lm(&pose, &subset, 100);
        let (next, _) = inliers_of(&pose, corrs, cfg.threshold);
        if next == inliers {
            break;
        }
        if next.len() < 4 {
            return Err(RegistrationError::NoConsensus(next.len()));
        }
        inliers = next;
    }
    let rms = (inliers
        .iter()
        .map(|&i| reprojection_error(&pose, &corrs[i]).powi(2))
        .sum::<f64>()
        / inliers.len() as f64)
        .sqrt();
    pose.width = resolution.0;
    pose.height = resolution.1;
    Ok(PnpResult { pose, inliers, rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{intrinsics_from_fov, rotation_angle_between};
    use rand::Rng;

    fn scene(n: usize, seed: u64) -> (CameraPose, Vec<Correspondence2D3D>) {
        let k = intrinsics_from_fov(0.9, 640, 480);
        let truth = CameraPose::look_at(
            Vec3::new(1.5, -5.0, 1.0),
            Vec3::zeros(),
            Vec3::z(),
            k,
            640,
            480,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corrs = (0..n)
            .map(|_| {
                let world = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                Correspondence2D3D {
                    world,
                    pixel: truth.project(&world).unwrap(),
                }
            })
            .collect();
        (truth, corrs)
    }

    #[test]
    fn noise_free_pose_is_exact() {
        let (truth, corrs) = scene(50, 1);
        let res = pnp_pose(&corrs, &truth.k, (640, 480), &RansacConfig::default()).unwrap();
        assert_eq!(res.inliers.len(), 50);
        assert!(rotation_angle_between(&res.pose.r, &truth.r) < 1e-6);
        assert!((res.pose.t - truth.t).norm() < 1e-8);
    }

    #[test]
    fn lm_recovers_from_perturbation() {
        let (truth, corrs) = scene(30, 2);
        let mut init = truth.clone();
        init.r = rodrigues(&Vec3::new(0.02, -0.01, 0.015)) * truth.r;
        init.t += Vec3::new(0.05, -0.03, 0.1);
        let p = refine_pose_lm(&init, &corrs, 100);
        assert!(rotation_angle_between(&p.r, &truth.r) < 1e-9);
        assert!((p.t - truth.t).norm() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let (truth, corrs) = scene(3, 3);
        assert!(matches!(
            pnp_pose(&corrs, &truth.k, (640, 480), &RansacConfig::default()),
            Err(RegistrationError::TooFewPoints { need: 4, got: 3 })
        ));
    }
}
