//! Central finite differences against the analytic gradient, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::{backward, kl_loss};
use super::{forward_pass, Arch, DslfNet, NetError};

/// Step used by the gradient checks. Larger steps cross relu kinks on a
/// sizeable share of random nets.
pub const CHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter index where the worst error occurred.
    pub worst: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`, maximized over entries.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> GradCheck {
    assert_eq!(analytic.len(), numeric.len());
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: 0,
    };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        if rel > out.max_rel_error {
            out = GradCheck {
                max_rel_error: rel,
                worst: i,
            };
        }
    }
    out
}

/// Central-difference gradient of the batch loss with step `h`.
pub fn numeric_gradient(
    arch: &Arch,
    params: &[f64],
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
    h: f64,
) -> Vec<f64> {
    let mut p = params.to_vec();
    let loss = |p: &[f64]| kl_loss(forward_pass(arch, p, inputs, batch).output(), targets);
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Maximum relative error between backprop and finite differences over every parameter.
pub fn gradient_check(
    arch: &Arch,
    params: &[f64],
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
    h: f64,
) -> GradCheck {
    let analytic = backward(arch, params, inputs, targets, batch).grads;
    let numeric = numeric_gradient(arch, params, inputs, targets, batch, h);
    compare_gradients(&analytic, &numeric)
}

/// Seeded parameters for a gradient check: the usual initialization with
/// biases drawn from `U(-0.1, 0.1)`. Zero biases put every unit fed by an
/// all-inactive layer exactly on the relu kink, where one-sided and central
/// derivatives disagree.
pub fn check_params(arch: &Arch, seed: u64) -> Result<Vec<f64>, NetError> {
    let net = DslfNet::init(arch.clone(), seed)?;
    let mut params: Vec<f64> = net.params().iter().map(|&p| p as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for ((_, b), l) in arch.offsets().into_iter().zip(arch.layers()) {
        for p in &mut params[b..b + l.out_dim] {
            *p = rng.random_range(-0.1..0.1);
        }
    }
    Ok(params)
}

/// Seeded batch of inputs in `[-1, 1]` and targets in `[0, 1]`.
pub fn check_batch(batch: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..batch * 5)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let y = (0..batch * 3)
        .map(|_| rng.random_range(0.0..=1.0))
        .collect();
    (x, y)
}
