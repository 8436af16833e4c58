//! Bernoulli KL loss and exact backpropagation.

use super::{forward_pass, Arch, Cache, LayerSpec, Real, Skip};

/// Clamp applied to both distributions before taking logarithms.
pub const KL_EPS: f64 = 1e-7;

fn clamp<T: Real>(v: T) -> T {
    let lo = T::from_f64(KL_EPS);
    let hi = T::ONE - lo;
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Mean over every entry of `p ln(p/q) + (1-p) ln((1-p)/(1-q))`, accumulated in f64.
pub fn kl_loss<T: Real>(q: &[T], p: &[T]) -> f64 {
    assert_eq!(q.len(), p.len(), "kl_loss shape mismatch");
    if q.is_empty() {
        return 0.0;
    }
    let sum: f64 = q
        .iter()
        .zip(p)
        .map(|(&q, &p)| {
            let q = clamp(q).to_f64();
            let p = clamp(p).to_f64();
            p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
        })
        .sum();
    (sum / q.len() as f64).max(0.0)
}

/// Independent scalar form of the same divergence, for cross-checking.
pub fn kl_loss_oracle(q: &[f64], p: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..q.len() {
        let qi = q[i].clamp(KL_EPS, 1.0 - KL_EPS);
        let pi = p[i].clamp(KL_EPS, 1.0 - KL_EPS);
        let pos = pi * pi.ln() - pi * qi.ln();
        let neg = (1.0 - pi) * (1.0 - pi).ln() - (1.0 - pi) * (1.0 - qi).ln();
        total += pos + neg;
    }
    total / q.len() as f64
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub loss: f64,
    /// Same layout as the flat parameter vector.
    pub grads: Vec<T>,
}

fn layer_grads<T: Real>(
    l: &LayerSpec,
    w: &[T],
    input: &[T],
    delta: &[T],
    batch: usize,
    gw: &mut [T],
    gb: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    // gw (out x in) = delta^T (out x batch) * input (batch x in)
    T::gemm(
        l.out_dim,
        batch,
        l.in_dim,
        T::ONE,
        delta,
        1,
        l.out_dim,
        input,
        l.in_dim,
        1,
        T::ZERO,
        gw,
        l.in_dim,
        1,
    );
    for g in gb.iter_mut() {
        *g = T::ZERO;
    }
    for row in delta.chunks_exact(l.out_dim) {
        for (g, &d) in gb.iter_mut().zip(row) {
            *g += d;
        }
    }
    if !want_dx {
        return None;
    }
    // dx (batch x in) = delta (batch x out) * w (out x in)
    let mut dx = vec![T::ZERO; batch * l.in_dim];
    T::gemm(
        batch,
        l.out_dim,
        l.in_dim,
        T::ONE,
        delta,
        l.out_dim,
        1,
        w,
        l.in_dim,
        1,
        T::ZERO,
        &mut dx,
        l.in_dim,
        1,
    );
    Some(dx)
}

/// Multiplies an upstream gradient by the activation derivative of `l`, given its outputs.
fn through_activation<T: Real>(l: &LayerSpec, upstream: &mut [T], output: &[T]) {
    for (g, &y) in upstream.iter_mut().zip(output) {
        *g = *g * l.activation.derivative_from_output(y);
    }
}

/// Loss and gradient of [`kl_loss`] for one batch. At the sigmoid head the
/// gradient with respect to the pre-activation is `(q - p) / (3B)`.
pub fn backward<T: Real>(
    arch: &Arch,
    params: &[T],
    inputs: &[T],
    targets: &[T],
    batch: usize,
) -> Gradients<T> {
    let cache = forward_pass(arch, params, inputs, batch);
    backward_from_cache(arch, params, &cache, targets)
}

pub(crate) fn backward_from_cache<T: Real>(
    arch: &Arch,
    params: &[T],
    cache: &Cache<T>,
    targets: &[T],
) -> Gradients<T> {
    let batch = cache.batch;
    let q = cache.output();
    assert_eq!(q.len(), targets.len(), "target shape");
    let loss = kl_loss(q, targets);
    let offsets = arch.offsets();
    let layers: Vec<&LayerSpec> = arch.layers().collect();
    let mut grads = vec![T::ZERO; params.len()];
    let n_dir = arch.direction.len();
    let n_pos = arch.position.len();
    let dd = arch.direction.last().unwrap().out_dim;
    let dp = arch.position.last().unwrap().out_dim;
    let feat_w = dd + dp;

    let scale = T::from_f64(1.0 / (3 * batch) as f64);
    let mut delta: Vec<T> = q
        .iter()
        .zip(targets)
        .map(|(&q, &p)| (q - clamp(p)) * scale)
        .collect();
    let mut d_feat = vec![T::ZERO; batch * feat_w];

    let first_trunk = n_dir + n_pos;
    for j in (0..arch.trunk.len()).rev() {
        let li = first_trunk + j;
        let l = layers[li];
        let (w, b) = offsets[li];
        let (gw, rest) = grads[w..].split_at_mut(b - w);
        let dx = layer_grads(
            l,
            &params[w..b],
            &cache.inputs[li],
            &delta,
            batch,
            gw,
            &mut rest[..l.out_dim],
            true,
        )
        .expect("requested");
        if j == 0 {
            for (a, g) in d_feat.iter_mut().zip(&dx) {
                *a += *g;
            }
            break;
        }
        let prev = arch.trunk[j - 1].out_dim;
        let mut d_prev = if matches!(arch.skip, Skip::Concat { layer } if layer == j) {
            let mut d_prev = Vec::with_capacity(batch * prev);
            for (r, row) in dx.chunks_exact(l.in_dim).enumerate() {
                d_prev.extend_from_slice(&row[..prev]);
                for (a, g) in d_feat[r * feat_w..(r + 1) * feat_w]
                    .iter_mut()
                    .zip(&row[prev..])
                {
                    *a += *g;
                }
            }
            d_prev
        } else {
            dx
        };
        through_activation(layers[li - 1], &mut d_prev, &cache.outputs[li - 1]);
        delta = d_prev;
    }

    let mut d_dir = Vec::with_capacity(batch * dd);
    let mut d_pos = Vec::with_capacity(batch * dp);
    for row in d_feat.chunks_exact(feat_w) {
        d_dir.extend_from_slice(&row[..dd]);
        d_pos.extend_from_slice(&row[dd..]);
    }
    for (start, count, mut upstream) in [(0, n_dir, d_dir), (n_dir, n_pos, d_pos)] {
        for k in (0..count).rev() {
            let li = start + k;
            let l = layers[li];
            through_activation(l, &mut upstream, &cache.outputs[li]);
            let (w, b) = offsets[li];
            let (gw, rest) = grads[w..].split_at_mut(b - w);
            match layer_grads(
                l,
                &params[w..b],
                &cache.inputs[li],
                &upstream,
                batch,
                gw,
                &mut rest[..l.out_dim],
                k > 0,
            ) {
                Some(dx) => upstream = dx,
                None => break,
            }
        }
    }
    Gradients { loss, grads }
}
