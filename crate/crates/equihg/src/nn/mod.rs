//! Learnable layers over the tape: parameter storage, Linear/Mlp, losses.
//!
//! Parameters live in a [`ParamSet`] outside any tape. A forward pass imports
//! them as leaves (`import_all`), and after `backward` the tape's leaf grads
//! are added back with `accumulate_grads_from`. This keeps tapes disposable
//! and lets several tapes (e.g. worker threads) read the same parameters.

mod adam;
mod checkpoint;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use crate::tensor::{Tape, Tensor, TensorId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Relu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: TensorId) -> TensorId {
        match self {
            Activation::Silu => tape.silu(x),
            Activation::Relu => tape.relu(x),
        }
    }
}

/// Index of a parameter within its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Ordered, name-addressable collection of trainable tensors. Iteration order
/// is insertion order everywhere (init, optimizer state, checkpoints), which
/// is what makes runs reproducible.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, mut t: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "param name {name:?} already taken"
        );
        t.set_requires_grad(true);
        self.names.push(name);
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|s| s.as_str()).zip(&self.tensors)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Copies every parameter onto the tape as a grad-tracking leaf, in
    /// parameter order. `leaves[id.0]` is the tape handle for param `id`.
    /// Leaves are detached: the tape's grads cover this tape only.
    pub fn import_all(&self, tape: &mut Tape) -> Vec<TensorId> {
        self.tensors
            .iter()
            .map(|t| tape.leaf(t.detached()))
            .collect()
    }

    /// Like `import_all` but substitutes an existing tape node for one
    /// parameter (used to grad-check a single tensor).
    pub fn import_with_override(
        &self,
        tape: &mut Tape,
        which: ParamId,
        replacement: TensorId,
    ) -> Vec<TensorId> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == which.0 {
                    replacement
                } else {
                    tape.leaf(t.detached())
                }
            })
            .collect()
    }

    /// Adds the tape's leaf gradients onto the stored parameter grads.
    /// Callers accumulate across batches/threads and then step the optimizer.
    pub fn accumulate_grads_from(&mut self, tape: &Tape, leaves: &[TensorId]) {
        assert_eq!(leaves.len(), self.tensors.len());
        for (t, &leaf) in self.tensors.iter_mut().zip(leaves) {
            if let Some(g) = tape.grad(leaf) {
                t.accumulate_grad(g);
            }
        }
    }

    /// Total scalar count across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Maps a flat coordinate into (param, offset); used by finite-difference
    /// checks over the whole parameter vector.
    pub fn locate(&self, flat: usize) -> (ParamId, usize) {
        let mut rem = flat;
        for (i, t) in self.tensors.iter().enumerate() {
            if rem < t.numel() {
                return (ParamId(i), rem);
            }
            rem -= t.numel();
        }
        panic!(
            "flat index {flat} out of range for {} scalars",
            self.num_scalars()
        );
    }

    /// Concatenated gradients in parameter order (zeros where absent).
    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for t in &self.tensors {
            match t.grad() {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(t.numel())),
            }
        }
        out
    }
}

/// Fully connected layer; weight is out x in, applied as `x @ W^T + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Weights ~ uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)), biases zero.
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "linear {name}: empty dimension");
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w: Vec<f64> = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let weight = ps.add(format!("{name}.weight"), Tensor::matrix(out_dim, in_dim, w));
        let bias = ps.add(format!("{name}.bias"), Tensor::new(vec![out_dim], vec![0.0; out_dim]));
        Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn apply(&self, tape: &mut Tape, leaves: &[TensorId], x: TensorId) -> TensorId {
        let w = leaves[self.weight.0];
        let b = leaves[self.bias.0];
        let rows = tape.shape(x)[0];
        let y = tape.matmul_bt(x, w);
        let bb = tape.broadcast(b, &[rows, self.out_dim]);
        tape.add(y, bb)
    }
}

/// Stack of Linear layers with the activation between them (not after the
/// last). `dims` lists layer widths input-first, e.g. `[in, hidden, out]`.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        dims: &[usize],
        activation: Activation,
    ) -> Self {
        assert!(dims.len() >= 2, "mlp {name}: need at least [in, out] dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::init(ps, rng, &format!("{name}.l{i}"), w[0], w[1]))
            .collect();
        Mlp { layers, activation }
    }

    pub fn apply(&self, tape: &mut Tape, leaves: &[TensorId], x: TensorId) -> TensorId {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(tape, leaves, h);
            if i + 1 < self.layers.len() {
                h = self.activation.apply(tape, h);
            }
        }
        h
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().unwrap().in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }
}

/// Mean squared error over equally shaped tensors, as a differentiable
/// scalar node.
pub fn mse_loss(tape: &mut Tape, pred: TensorId, target: TensorId) -> TensorId {
    let n = tape.value(pred).numel();
    assert!(n > 0, "mse_loss: empty prediction");
    let d = tape.sub(pred, target);
    let sq = tape.square(d);
    let total = tape.sum_all(sq);
    tape.scale(total, 1.0 / n as f64)
}

/// Mean absolute error of plain slices (reporting metric, not differentiated).
pub fn mae(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(
        pred.len(),
        target.len(),
        "mae: length mismatch {} vs {}",
        pred.len(),
        target.len()
    );
    assert!(!pred.is_empty(), "mae: empty input");
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum();
    total / pred.len() as f64
}
