//! Levenberg-Marquardt bundle adjustment with a Schur-complement solve.
//!
//! The objective is `sum w_ij |P(pose_j, X_i) - x_ij|²` with binary weights.
//! Each pose carries a left-multiplicative axis-angle increment and an additive
//! translation increment; points are updated additively. Pose 0 is frozen, and
//! so is the coordinate of pose 1's translation with the largest baseline
//! component, which fixes the global scale.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

use super::pnp::{projection_jacobian, skew};
use super::RegistrationError;
use crate::camera::{nearest_rotation, rodrigues, CameraPose};
use crate::{Vec2, Vec3};

type Mat6x3 = SMatrix<f64, 6, 3>;
type Mat2x6 = SMatrix<f64, 2, 6>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub view: usize,
    pub point: usize,
    pub pixel: Vec2,
    /// Visibility weight, 0 or 1.
    pub weight: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconState {
    pub poses: Vec<CameraPose>,
    pub points: Vec<Vec3>,
    pub observations: Vec<Observation>,
}

impl ReconState {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if self.poses.len() < 2 {
            return Err(RegistrationError::Invalid("need at least two poses".into()));
        }
        for (i, o) in self.observations.iter().enumerate() {
            if o.view >= self.poses.len() || o.point >= self.points.len() {
                return Err(RegistrationError::Invalid(format!(
                    "observation {i} references view {} / point {} out of range",
                    o.view, o.point
                )));
            }
            if o.weight > 1 {
                return Err(RegistrationError::Invalid(format!(
                    "observation {i} has weight {}",
                    o.weight
                )));
            }
            if !(o.pixel.x.is_finite() && o.pixel.y.is_finite()) {
                return Err(RegistrationError::Invalid(format!(
                    "observation {i} is not finite"
                )));
            }
        }
        Ok(())
    }

    fn active(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter().filter(|o| o.weight == 1)
    }

    /// Stacked residuals `projection - pixel` over the active observations.
    pub fn residuals(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for o in self.active() {
            let pose = &self.poses[o.view];
            let pc = pose.to_camera(&self.points[o.point]);
            let h = pose.k * pc;
            out.push(h.x / h.z - o.pixel.x);
            out.push(h.y / h.z - o.pixel.y);
        }
        out
    }

    /// Sum of squared residuals; infinite if a point falls behind a camera.
    pub fn cost(&self) -> f64 {
        let behind = self
            .active()
            .any(|o| self.poses[o.view].to_camera(&self.points[o.point]).z <= 0.0);
        if behind {
            return f64::INFINITY;
        }
        self.residuals().iter().map(|r| r * r).sum()
    }

    /// Root mean square reprojection distance, in pixels.
    pub fn rms(&self) -> f64 {
        let n = self.active().count();
        if n == 0 {
            return 0.0;
        }
        (self.cost() / n as f64).sqrt()
    }

    /// Applies a step laid out as `[w_0, t_0, w_1, t_1, ..., X_0, X_1, ...]`.
    pub fn apply_update(&self, delta: &[f64]) -> ReconState {
        let m = self.poses.len();
        assert_eq!(delta.len(), 6 * m + 3 * self.points.len(), "update shape");
        let mut next = self.clone();
        for (j, pose) in next.poses.iter_mut().enumerate() {
            let d = &delta[6 * j..6 * j + 6];
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            pose.r = nearest_rotation(&(rodrigues(&Vec3::new(d[0], d[1], d[2])) * pose.r));
            pose.t += Vec3::new(d[3], d[4], d[5]);
        }
        for (i, p) in next.points.iter_mut().enumerate() {
            let d = &delta[6 * m + 3 * i..6 * m + 3 * i + 3];
            *p += Vec3::new(d[0], d[1], d[2]);
        }
        next
    }

    /// Parameter indices held fixed: all of pose 0 and one translation
    /// coordinate of pose 1.
    pub fn gauge_indices(&self) -> Vec<usize> {
        let mut fixed: Vec<usize> = (0..6).collect();
        // camera 0's center expressed in camera 1's frame: the baseline seen from pose 1
        let b = self.poses[1].to_camera(&self.poses[0].center());
        fixed.push(6 + 3 + b.iamax());
        fixed
    }
}

/// Jacobian blocks of one observation.
fn obs_jacobian(state: &ReconState, o: &Observation) -> (Vec2, Mat2x6, SMatrix<f64, 2, 3>) {
    let pose = &state.poses[o.view];
    let rx = pose.r * state.points[o.point];
    let pc = rx + pose.t;
    let h = pose.k * pc;
    let r = Vec2::new(h.x / h.z - o.pixel.x, h.y / h.z - o.pixel.y);
    let dp = projection_jacobian(&pose.k, &pc);
    let mut jc = Mat2x6::zeros();
    jc.fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(dp * -skew(&rx)));
    jc.fixed_view_mut::<2, 3>(0, 3).copy_from(&dp);
    (r, jc, dp * pose.r)
}

/// Full Jacobian of [`ReconState::residuals`] with columns laid out as in
/// [`ReconState::apply_update`]; gauge columns are included.
pub fn dense_jacobian(state: &ReconState) -> DMatrix<f64> {
    let m = state.poses.len();
    let active: Vec<&Observation> = state.active().collect();
    let mut j = DMatrix::zeros(2 * active.len(), 6 * m + 3 * state.points.len());
    for (row, o) in active.iter().enumerate() {
        let (_, jc, jp) = obs_jacobian(state, o);
        j.view_mut((2 * row, 6 * o.view), (2, 6)).copy_from(&jc);
        j.view_mut((2 * row, 6 * m + 3 * o.point), (2, 3))
            .copy_from(&jp);
    }
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaConfig {
    pub max_iterations: usize,
    pub lambda0: f64,
    /// Stop when the largest gradient entry falls below this.
    pub gradient_tol: f64,
    /// Stop when the RMS reprojection error falls below this (pixels).
    pub rms_tol: f64,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            lambda0: 1e-3,
            gradient_tol: 1e-12,
            rms_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaResult {
    pub state: ReconState,
    /// Cost before optimization followed by the cost after each accepted step.
    pub trace: Vec<f64>,
    pub accepted_steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub rms: f64,
}

struct Normal {
    u: DMatrix<f64>,
    gc: DVector<f64>,
    v: Vec<Matrix3<f64>>,
    gp: Vec<Vector3<f64>>,
    /// Per point, the views observing it with their `J_c^T J_p` block.
    w: Vec<Vec<(usize, Mat6x3)>>,
}

fn build_normal(state: &ReconState, fixed: &[usize]) -> Normal {
    let m = state.poses.len();
    let n = state.points.len();
    let mut u = DMatrix::zeros(6 * m, 6 * m);
    let mut gc = DVector::zeros(6 * m);
    let mut v = vec![Matrix3::zeros(); n];
    let mut gp = vec![Vector3::zeros(); n];
    let mut w: Vec<Vec<(usize, Mat6x3)>> = vec![Vec::new(); n];
    for o in state.active() {
        let (r, mut jc, jp) = obs_jacobian(state, o);
        for &f in fixed {
            if f / 6 == o.view {
                jc.column_mut(f % 6).fill(0.0);
            }
        }
        let base = 6 * o.view;
        let mut ub = u.view_mut((base, base), (6, 6));
        ub += jc.transpose() * jc;
        let mut gb = gc.rows_mut(base, 6);
        gb += jc.transpose() * r;
        v[o.point] += jp.transpose() * jp;
        gp[o.point] += jp.transpose() * r;
        let block = jc.transpose() * jp;
        match w[o.point].iter_mut().find(|(view, _)| *view == o.view) {
            Some((_, b)) => *b += block,
            None => w[o.point].push((o.view, block)),
        }
    }
    Normal { u, gc, v, gp, w }
}

/// Damped Schur-complement solve; `None` when the reduced system is not positive definite.
fn solve_step(nrm: &Normal, lambda: f64, fixed: &[usize], m: usize) -> Option<Vec<f64>> {
    let damp = |d: f64| d + lambda * d.max(1e-12);
    let mut s = nrm.u.clone();
    for i in 0..6 * m {
        s[(i, i)] = damp(nrm.u[(i, i)]);
    }
    let mut rhs = -nrm.gc.clone();
    let mut vinv = Vec::with_capacity(nrm.v.len());
    for (i, v) in nrm.v.iter().enumerate() {
        let mut vd = *v;
        for k in 0..3 {
            vd[(k, k)] = damp(v[(k, k)]);
        }
        let inv = vd.try_inverse()?;
        for (j, wj) in &nrm.w[i] {
            let wv = wj * inv;
            let mut r = rhs.rows_mut(6 * j, 6);
            r += wv * nrm.gp[i];
            for (k, wk) in &nrm.w[i] {
                let mut sb = s.view_mut((6 * j, 6 * k), (6, 6));
                sb -= wv * wk.transpose();
            }
        }
        vinv.push(inv);
    }
    for &f in fixed {
        s.row_mut(f).fill(0.0);
        s.column_mut(f).fill(0.0);
        s[(f, f)] = 1.0;
        rhs[f] = 0.0;
    }
    let dc = s.cholesky()?.solve(&rhs);
    let mut delta: Vec<f64> = dc.iter().copied().collect();
    for (i, inv) in vinv.iter().enumerate() {
        let mut b = -nrm.gp[i];
        for (j, wj) in &nrm.w[i] {
            b -= wj.transpose() * dc.rows(6 * j, 6);
        }
        delta.extend((inv * b).iter());
    }
    Some(delta)
}

/// Marquardt-damped Gauss-Newton: `lambda0`, x10 on a rejected step, /10 on an
/// accepted one. Steps are accepted only if they strictly decrease the cost.
pub fn bundle_adjust(state: &ReconState, cfg: &BaConfig) -> Result<BaResult, RegistrationError> {
    state.validate()?;
    let m = state.poses.len();
    let fixed = state.gauge_indices();
    let mut cur = state.clone();
    let mut cost = cur.cost();
    if !cost.is_finite() {
        return Err(RegistrationError::Invalid(
            "a point lies behind an observing camera".into(),
        ));
    }
    let n_obs = cur.active().count().max(1) as f64;
    let mut trace = vec![cost];
    let mut lambda = cfg.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if (cost / n_obs).sqrt() < cfg.rms_tol {
            converged = true;
            break;
        }
        let nrm = build_normal(&cur, &fixed);
        let gmax = nrm
            .gc
            .iter()
            .copied()
            .chain(nrm.gp.iter().flat_map(|g| g.iter().copied()))
            .fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax < cfg.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while lambda < 1e16 {
            if let Some(delta) = solve_step(&nrm, lambda, &fixed, m) {
                let cand = cur.apply_update(&delta);
                let c2 = cand.cost();
                if c2 < cost {
                    cur = cand;
                    cost = c2;
                    trace.push(cost);
                    lambda = (lambda / 10.0).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no damping level decreases the cost: a numerical stationary point
            converged = true;
            break;
        }
    }
    let rms = cur.rms();
    Ok(BaResult {
        state: cur,
        accepted_steps: trace.len() - 1,
        trace,
        iterations,
        converged,
        rms,
    })
}
