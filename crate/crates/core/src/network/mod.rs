//! The two-stream residual network.
//!
//! Input rows are `(2u-1, 2v-1, dx, dy, dz)`. Columns 2..5 feed the direction
//! stream, columns 0..2 the position stream. Their outputs are concatenated as
//! `[direction | position]` and passed through the trunk, which ends in three
//! sigmoid units. With a skip connection, the concatenated stream features are
//! appended to the input of one trunk layer: that layer sees `[previous | streams]`.
//!
//! Parameters live in one flat vector ordered direction layers, position
//! layers, trunk layers; each layer contributes its `out x in` row-major
//! weights followed by its `out` biases.

mod adam;
mod backward;
mod gradcheck;
mod real;
mod serialize;
mod train;

pub use adam::AdamState;
pub use backward::{backward, kl_loss, kl_loss_oracle, Gradients, KL_EPS};
pub use gradcheck::{
    check_batch, check_params, compare_gradients, gradient_check, numeric_gradient, GradCheck,
    CHECK_STEP,
};
pub use real::Real;
pub use serialize::{NetManifest, DNET_MAGIC, DNET_VERSION, HEADER_LEN};
pub use train::{evaluate_kl, train, EpochLog, LrStage, TrainReport, TrainSchedule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("architecture: {0}")]
    Arch(String),
    #[error("input has {got} values, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite input at row {0}")]
    NonFinite(usize),
    #[error("not a DNET file")]
    Magic,
    #[error("unsupported DNET version {0}")]
    Version(u32),
    #[error("malformed DNET file: {0}")]
    Format(String),
    #[error("training: {0}")]
    Train(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::ZERO {
                    z
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => T::ONE / (T::ONE + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => y * (T::ONE - y),
            Activation::Identity => T::ONE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Where the concatenated stream features re-enter the trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Skip {
    None,
    /// Appended to the input of trunk layer `layer` (0-based, never the first).
    Concat {
        layer: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub direction: Vec<LayerSpec>,
    pub position: Vec<LayerSpec>,
    pub trunk: Vec<LayerSpec>,
    pub skip: Skip,
}

fn chain(input: usize, widths: &[usize], last: Activation) -> Vec<LayerSpec> {
    let mut dims = vec![input];
    dims.extend_from_slice(widths);
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i + 2 == dims.len() {
                last
            } else {
                Activation::Relu
            },
        })
        .collect()
}

impl Arch {
    /// Relu streams and trunk with a 3-unit sigmoid head. `skip_into` names
    /// the trunk layer (0-based) that also receives the stream features.
    pub fn build(
        direction: &[usize],
        position: &[usize],
        trunk_hidden: &[usize],
        skip_into: Option<usize>,
    ) -> Result<Self, NetError> {
        if direction.is_empty() || position.is_empty() {
            return Err(NetError::Arch(
                "both streams need at least one layer".into(),
            ));
        }
        let feat = direction[direction.len() - 1] + position[position.len() - 1];
        let mut widths = trunk_hidden.to_vec();
        widths.push(3);
        let mut trunk = chain(feat, &widths, Activation::Sigmoid);
        let skip = match skip_into {
            None => Skip::None,
            Some(layer) => {
                if layer == 0 || layer >= trunk.len() {
                    return Err(NetError::Arch(format!(
                        "cannot inject skip into trunk layer {layer}"
                    )));
                }
                trunk[layer].in_dim += feat;
                Skip::Concat { layer }
            }
        };
        let arch = Self {
            direction: chain(3, direction, Activation::Relu),
            position: chain(2, position, Activation::Relu),
            trunk,
            skip,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Full-size network: direction 3-512-256, position 2-512-256-192,
    /// trunk 448-1000-800-(800+448)-600-3.
    pub fn full() -> Self {
        Self::build(&[512, 256], &[512, 256, 192], &[1000, 800, 600], Some(2)).expect("valid")
    }

    /// Every width of [`Arch::full`] multiplied by `factor` (rounded, at least 1).
    pub fn scaled(factor: f64) -> Self {
        let s = |v: &[usize]| -> Vec<usize> {
            v.iter()
                .map(|&w| ((w as f64 * factor).round() as usize).max(1))
                .collect()
        };
        Self::build(
            &s(&[512, 256]),
            &s(&[512, 256, 192]),
            &s(&[1000, 800, 600]),
            Some(2),
        )
        .expect("valid")
    }

    /// Tiny network used for gradient checks.
    pub fn toy(skip: bool) -> Self {
        if skip {
            Self::build(&[8, 4], &[8, 4], &[8, 8], Some(1)).expect("valid")
        } else {
            Self::build(&[8, 4], &[8, 4], &[8], None).expect("valid")
        }
    }

    /// Trunk made of a subset of the four trunk layers `1..=4` with the given
    /// hidden widths for layers 1-3. Layer 4 is the head and must be present;
    /// the skip is wired into layer 3 whenever it is kept.
    pub fn trunk_ablation(
        direction: &[usize],
        position: &[usize],
        trunk_widths: [usize; 3],
        layers: &[usize],
    ) -> Result<Self, NetError> {
        if !layers.contains(&1) || !layers.contains(&4) {
            return Err(NetError::Arch("ablations keep trunk layers 1 and 4".into()));
        }
        let mut hidden = Vec::new();
        let mut skip = None;
        for l in 1..=3 {
            if layers.contains(&l) {
                if l == 3 {
                    skip = Some(hidden.len());
                }
                hidden.push(trunk_widths[l - 1]);
            }
        }
        Self::build(direction, position, &hidden, skip)
    }

    pub fn feature_dim(&self) -> usize {
        self.direction.last().map_or(0, |l| l.out_dim)
            + self.position.last().map_or(0, |l| l.out_dim)
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.direction
            .iter()
            .chain(&self.position)
            .chain(&self.trunk)
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .map(|l| l.in_dim * l.out_dim + l.out_dim)
            .sum()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let err = |m: String| Err(NetError::Arch(m));
        if self.direction.is_empty() || self.position.is_empty() || self.trunk.is_empty() {
            return err("every part needs at least one layer".into());
        }
        if self.layers().any(|l| l.in_dim == 0 || l.out_dim == 0) {
            return err("zero-sized layer".into());
        }
        for (name, layers, input) in [
            ("direction", &self.direction, 3),
            ("position", &self.position, 2),
        ] {
            if layers[0].in_dim != input {
                return err(format!("{name} stream must take {input} inputs"));
            }
            for w in layers.windows(2) {
                if w[0].out_dim != w[1].in_dim {
                    return err(format!("{name} stream dimensions do not chain"));
                }
            }
        }
        let feat = self.feature_dim();
        if self.trunk[0].in_dim != feat {
            return err(format!(
                "trunk input {} != stream outputs {feat}",
                self.trunk[0].in_dim
            ));
        }
        let skip_layer = match self.skip {
            Skip::None => None,
            Skip::Concat { layer } => {
                if layer == 0 || layer >= self.trunk.len() {
                    return err(format!("skip into invalid trunk layer {layer}"));
                }
                Some(layer)
            }
        };
        for j in 1..self.trunk.len() {
            let extra = if skip_layer == Some(j) { feat } else { 0 };
            if self.trunk[j].in_dim != self.trunk[j - 1].out_dim + extra {
                return err(format!("trunk layer {j} input does not chain"));
            }
        }
        let head = self.trunk[self.trunk.len() - 1];
        if head.out_dim != 3 || head.activation != Activation::Sigmoid {
            return err("head must be 3 sigmoid units".into());
        }
        Ok(())
    }

    /// Offsets of each layer's weights and biases in the flat parameter
    /// vector, in [`Arch::layers`] order.
    pub fn offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.layers()
            .map(|l| {
                let w = off;
                let b = w + l.in_dim * l.out_dim;
                off = b + l.out_dim;
                (w, b)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DslfNet {
    arch: Arch,
    params: Vec<f32>,
}

impl DslfNet {
    /// He-uniform weights for relu layers, Xavier-uniform otherwise, zero biases.
    pub fn init(arch: Arch, seed: u64) -> Result<Self, NetError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0f32; arch.param_count()];
        for (l, (w, _)) in arch.layers().zip(arch.offsets()) {
            let bound = match l.activation {
                Activation::Relu => (6.0 / l.in_dim as f64).sqrt(),
                _ => (6.0 / (l.in_dim + l.out_dim) as f64).sqrt(),
            };
            for p in &mut params[w..w + l.in_dim * l.out_dim] {
                *p = rng.random_range(-bound..bound) as f32;
            }
        }
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Arch, params: Vec<f32>) -> Result<Self, NetError> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(NetError::Shape {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NetError::Arch("non-finite parameter".into()));
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        5
    }

    /// `batch x 3` outputs in `(0, 1)`. Panics on a shape mismatch.
    pub fn forward(&self, inputs: &[f32], batch: usize) -> Vec<f32> {
        assert_eq!(inputs.len(), batch * 5, "input shape");
        const CHUNK: usize = 4096;
        let mut out = Vec::with_capacity(batch * 3);
        for rows in inputs.chunks(CHUNK * 5) {
            let cache = forward_pass(&self.arch, &self.params, rows, rows.len() / 5);
            out.extend_from_slice(cache.output());
        }
        out
    }

    /// [`DslfNet::forward`] with input validation.
    pub fn try_forward(&self, inputs: &[f32], batch: usize) -> Result<Vec<f32>, NetError> {
        if inputs.len() != batch * 5 {
            return Err(NetError::Shape {
                expected: batch * 5,
                got: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(NetError::NonFinite(i / 5));
        }
        Ok(self.forward(inputs, batch))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serialize::to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        serialize::from_bytes(bytes)
    }

    pub fn manifest(&self) -> NetManifest {
        serialize::manifest(self)
    }
}

/// Layer inputs and outputs of one forward pass, indexed like [`Arch::layers`].
pub(crate) struct Cache<T> {
    pub inputs: Vec<Vec<T>>,
    pub outputs: Vec<Vec<T>>,
    pub batch: usize,
}

impl<T> Cache<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().expect("non-empty net")
    }
}

/// Final-layer outputs are kept inside `[KL_EPS, 1 - KL_EPS]` so they are
/// strictly inside `(0, 1)` even where the f32 sigmoid would round to 0 or 1.
fn clamp_output<T: Real>(y: T) -> T {
    let lo = T::from_f64(KL_EPS);
    let hi = T::ONE - lo;
    if y < lo {
        lo
    } else if y > hi {
        hi
    } else {
        y
    }
}

fn dense<T: Real>(l: &LayerSpec, w: &[T], b: &[T], x: &[T], batch: usize) -> Vec<T> {
    let mut z = Vec::with_capacity(batch * l.out_dim);
    for _ in 0..batch {
        z.extend_from_slice(b);
    }
    // z (batch x out) += x (batch x in) * w^T (in x out)
    T::gemm(
        batch,
        l.in_dim,
        l.out_dim,
        T::ONE,
        x,
        l.in_dim,
        1,
        w,
        1,
        l.in_dim,
        T::ONE,
        &mut z,
        l.out_dim,
        1,
    );
    for v in &mut z {
        *v = l.activation.apply(*v);
    }
    z
}

fn columns<T: Real>(x: &[T], width: usize, range: std::ops::Range<usize>) -> Vec<T> {
    x.chunks_exact(width)
        .flat_map(|row| row[range.clone()].iter().copied())
        .collect()
}

fn hconcat<T: Real>(a: &[T], wa: usize, b: &[T], wb: usize, batch: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * (wa + wb));
    for r in 0..batch {
        out.extend_from_slice(&a[r * wa..(r + 1) * wa]);
        out.extend_from_slice(&b[r * wb..(r + 1) * wb]);
    }
    out
}

pub(crate) fn forward_pass<T: Real>(arch: &Arch, params: &[T], x: &[T], batch: usize) -> Cache<T> {
    let offsets = arch.offsets();
    let mut inputs = Vec::new();
    let mut outputs: Vec<Vec<T>> = Vec::new();
    let mut li = 0;
    let mut run =
        |l: &LayerSpec, input: Vec<T>, inputs: &mut Vec<Vec<T>>, outputs: &mut Vec<Vec<T>>| {
            let (w, b) = offsets[li];
            li += 1;
            let y = dense(l, &params[w..b], &params[b..b + l.out_dim], &input, batch);
            inputs.push(input);
            outputs.push(y);
        };
    let mut cur = columns(x, 5, 2..5);
    for l in &arch.direction {
        run(l, cur, &mut inputs, &mut outputs);
        cur = outputs.last().unwrap().clone();
    }
    let dir_out = cur;
    let mut cur = columns(x, 5, 0..2);
    for l in &arch.position {
        run(l, cur, &mut inputs, &mut outputs);
        cur = outputs.last().unwrap().clone();
    }
    let dd = arch.direction.last().unwrap().out_dim;
    let dp = arch.position.last().unwrap().out_dim;
    let feat = hconcat(&dir_out, dd, &cur, dp, batch);
    let mut cur = feat.clone();
    let mut prev_width = dd + dp;
    for (j, l) in arch.trunk.iter().enumerate() {
        let input = match arch.skip {
            Skip::Concat { layer } if layer == j => {
                hconcat(&cur, prev_width, &feat, dd + dp, batch)
            }
            _ => cur,
        };
        run(l, input, &mut inputs, &mut outputs);
        cur = outputs.last().unwrap().clone();
        prev_width = l.out_dim;
    }
    if let Some(last) = outputs.last_mut() {
        for y in last.iter_mut() {
            *y = clamp_output(*y);
        }
    }
    Cache {
        inputs,
        outputs,
        batch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_param_count() {
        // sum of in*out + out over every layer, the skip widening trunk layer 3 to 1248 inputs
        let dims: [(usize, usize); 9] = [
            (3, 512),
            (512, 256),
            (2, 512),
            (512, 256),
            (256, 192),
            (448, 1000),
            (1000, 800),
            (1248, 600),
            (600, 3),
        ];
        let expected: usize = dims.iter().map(|(i, o)| i * o + o).sum();
        assert_eq!(expected, 2_316_587);
        assert_eq!(Arch::full().param_count(), expected);
    }

    #[test]
    fn zero_net_outputs_half() {
        let arch = Arch::toy(true);
        let net = DslfNet::from_params(arch.clone(), vec![0.0; arch.param_count()]).unwrap();
        let out = net.forward(&[0.3, -0.2, 0.0, 0.6, 0.8, 1.0, 1.0, 1.0, 0.0, 0.0], 2);
        assert!(out.iter().all(|&q| q == 0.5));
    }

    #[test]
    fn init_is_seeded() {
        let a = DslfNet::init(Arch::toy(true), 7).unwrap();
        let b = DslfNet::init(Arch::toy(true), 7).unwrap();
        let c = DslfNet::init(Arch::toy(true), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mismatched_trunk_input_rejected() {
        let mut arch = Arch::toy(false);
        arch.trunk[0].in_dim += 1;
        assert!(DslfNet::init(arch, 0).is_err());
    }

    #[test]
    fn ablation_wiring() {
        let a = Arch::trunk_ablation(&[4], &[4], [6, 5, 7], &[1, 3, 4]).unwrap();
        assert_eq!(a.trunk.len(), 3);
        assert_eq!(a.skip, Skip::Concat { layer: 1 });
        assert_eq!(a.trunk[1].in_dim, 6 + 8);
        let b = Arch::trunk_ablation(&[4], &[4], [6, 5, 7], &[1, 2, 4]).unwrap();
        assert_eq!(b.skip, Skip::None);
        assert!(Arch::trunk_ablation(&[4], &[4], [6, 5, 7], &[2, 4]).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let net = DslfNet::init(Arch::toy(false), 1).unwrap();
        assert!(matches!(
            net.try_forward(&[0.0, 0.0, f32::NAN, 0.0, 1.0], 1),
            Err(NetError::NonFinite(0))
        ));
    }
}
