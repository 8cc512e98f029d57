//! Flow model architectures and their optimizer.
//!
//! Two coordinate-to-flow architectures are supported: a plain MLP
//! ([`Mlp`]) and a linear stack over sinusoidal Kronecker positional
//! encodings ([`PosEncLinear`]). Both provide exact reverse-mode gradients
//! for the fixed architectures; this is deliberately not a general autodiff.
//!
//! Models are mutable only inside their own optimization loop. A frozen model
//! is immutable and safe for concurrent forward calls.

mod adam;
mod checkpoint;
mod mlp;
mod posenc;

pub use adam::AdamState;
pub use checkpoint::{load_model, save_model};
pub use mlp::Mlp;
pub use posenc::PosEncLinear;

use ndarray::{Array1, Array2};

use crate::cloud::Aabb;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Activation applied between all but the last linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One dense layer: `y = x W^T + b`, weights stored row-major `(out, in)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// PyTorch-style uniform init in `[-sqrt(1/in), sqrt(1/in)]` for weights
    /// and biases; keeps initial flows near zero.
    fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Linear {
        let bound = (1.0 / in_dim as f64).sqrt();
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| rng.uniform_in(-bound, bound));
        let b = Array1::from_shape_fn(out_dim, |_| rng.uniform_in(-bound, bound));
        Linear { w, b }
    }

    fn zeros_like(&self) -> Linear {
        Linear {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// Parameter gradients, shaped exactly like the model's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Linear>,
}

impl Gradients {
    pub(crate) fn zeros_like(layers: &[Linear]) -> Gradients {
        Gradients {
            layers: layers.iter().map(Linear::zeros_like).collect(),
        }
    }

    /// Accumulates `other` into `self`. Shapes must match.
    pub fn add_assign(&mut self, other: &Gradients) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w += &b.w;
            a.b += &b.b;
        }
    }

    /// Flattens into the canonical parameter order: per layer, weights
    /// row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

pub(crate) fn flatten_layers(layers: &[Linear]) -> Vec<f64> {
    let n: usize = layers.iter().map(|l| l.w.len() + l.b.len()).sum();
    let mut out = Vec::with_capacity(n);
    for l in layers {
        out.extend(l.w.iter());
        out.extend(l.b.iter());
    }
    out
}

pub(crate) fn unflatten_layers(layers: &mut [Linear], flat: &[f64]) -> Result<()> {
    let expected: usize = layers.iter().map(|l| l.w.len() + l.b.len()).sum();
    if flat.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "flat parameter vector has {} values, model holds {expected}",
            flat.len()
        )));
    }
    let mut off = 0;
    for l in layers {
        for v in l.w.iter_mut() {
            *v = flat[off];
            off += 1;
        }
        for v in l.b.iter_mut() {
            *v = flat[off];
            off += 1;
        }
    }
    Ok(())
}

/// Recorded forward pass: the layer inputs needed to backpropagate once.
///
/// Consumed by value in `backward`, so a tape cannot be replayed.
#[derive(Debug)]
pub struct Tape {
    /// Raw model input (coordinates or fused-flow features).
    pub(crate) input: Array2<f64>,
    /// Encoded features when the model encodes its input (posenc), else None.
    pub(crate) encoded: Option<Array2<f64>>,
    /// Post-activation outputs of every layer but the last.
    pub(crate) hidden: Vec<Array2<f64>>,
}

/// Which architecture a [`FlowModel`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    LinearPosEnc,
}

/// Architecture hyperparameters for model initialization.
#[derive(Debug, Clone, Copy)]
pub struct ModelArch {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden: usize,
    /// Number of linear layers.
    pub depth: usize,
    pub output_dim: usize,
    /// Frequencies per axis for the positional encoding (feature dim `(2K)^3`).
    pub posenc_freqs: usize,
    /// Scene box used to normalize coordinates for the positional encoding.
    pub bbox: Aabb,
}

impl ModelArch {
    /// The default two-frame flow model: an 8-layer, 128-wide ReLU MLP on 3D coords.
    pub fn default_mlp() -> ModelArch {
        ModelArch {
            kind: ModelKind::Mlp,
            input_dim: 3,
            hidden: 128,
            depth: 8,
            output_dim: 3,
            posenc_freqs: 4,
            bbox: Aabb {
                min: [-1.0; 3],
                max: [1.0; 3],
            },
        }
    }

    pub fn with_input_dim(mut self, d: usize) -> ModelArch {
        self.input_dim = d;
        self
    }
}

/// A parameterized map from coordinates (or flow features) to 3D flow.
#[derive(Debug, Clone)]
pub enum FlowModel {
    Mlp(Mlp),
    PosEnc(PosEncLinear),
}

impl FlowModel {
    /// Fresh, randomly initialized model. Deterministic given the rng stream.
    pub fn init(arch: &ModelArch, rng: &mut Rng) -> FlowModel {
        match arch.kind {
            ModelKind::Mlp => FlowModel::Mlp(Mlp::init(
                arch.input_dim,
                arch.hidden,
                arch.depth,
                arch.output_dim,
                Activation::Relu,
                rng,
            )),
            ModelKind::LinearPosEnc => FlowModel::PosEnc(PosEncLinear::init(
                arch.posenc_freqs,
                arch.hidden,
                arch.depth,
                arch.output_dim,
                &arch.bbox,
                rng,
            )),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FlowModel::Mlp(m) => m.input_dim(),
            FlowModel::PosEnc(_) => 3,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FlowModel::Mlp(m) => m.output_dim(),
            FlowModel::PosEnc(m) => m.output_dim(),
        }
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Pure forward pass; repeated calls are bit-identical.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(match self {
            FlowModel::Mlp(m) => m.forward(x),
            FlowModel::PosEnc(m) => m.forward(x),
        })
    }

    /// Forward pass that records a [`Tape`] for one backward call.
    pub fn forward_tape(&self, x: Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.check_input(&x)?;
        Ok(match self {
            FlowModel::Mlp(m) => m.forward_tape(x),
            FlowModel::PosEnc(m) => m.forward_tape(x),
        })
    }

    /// Exact reverse-mode gradients of a scalar loss with upstream gradient
    /// `d loss / d output` for the taped batch. Returns parameter gradients
    /// and the gradient with respect to the model input.
    ///
    /// The tape is consumed; replaying a backward pass is a type error.
    pub fn backward(&self, tape: Tape, upstream: &Array2<f64>) -> (Gradients, Array2<f64>) {
        match self {
            FlowModel::Mlp(m) => m.backward(tape, upstream),
            FlowModel::PosEnc(m) => m.backward(tape, upstream),
        }
    }

    pub(crate) fn layers(&self) -> &[Linear] {
        match self {
            FlowModel::Mlp(m) => &m.layers,
            FlowModel::PosEnc(m) => &m.layers,
        }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Linear] {
        match self {
            FlowModel::Mlp(m) => &mut m.layers,
            FlowModel::PosEnc(m) => &mut m.layers,
        }
    }

    /// Zero-shaped gradients for this model.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros_like(self.layers())
    }

    /// Total number of parameters: sum over layers of `(in+1)*out`.
    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| (l.in_dim() + 1) * l.out_dim())
            .sum()
    }

    /// Parameters in canonical order (per layer: weights row-major, then bias).
    pub fn params_to_vec(&self) -> Vec<f64> {
        flatten_layers(self.layers())
    }

    /// Overwrites parameters from a flat vector in canonical order.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        unflatten_layers(self.layers_mut(), flat)
    }

    /// Shapes of the per-layer parameter tensors, in flatten order:
    /// `(len, is_bias)` pairs. Used for filter-normalized perturbations.
    pub fn param_tensor_sizes(&self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        for l in self.layers() {
            out.push((l.w.len(), false));
            out.push((l.b.len(), true));
        }
        out
    }
}
