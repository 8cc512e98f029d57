//! Linear flow model over sinusoidal Kronecker positional encodings.
//!
//! Coordinates are normalized to roughly [-1, 1] by the scene bounding box,
//! each axis is encoded as `[sin(2^k pi a), cos(2^k pi a)]` for `k = 0..K-1`,
//! and the per-axis encodings are combined by Kronecker product into a
//! `(2K)^3` feature vector feeding a stack of linear layers (no activations).

use ndarray::{Array2, Axis};
use std::f64::consts::PI;

use super::{Gradients, Linear, Tape};
use crate::cloud::{Aabb, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct PosEncLinear {
    pub(crate) layers: Vec<Linear>,
    pub(crate) freqs: usize,
    pub(crate) center: Vec3,
    pub(crate) inv_half: f64,
}

impl PosEncLinear {
    pub(crate) fn init(
        freqs: usize,
        hidden: usize,
        depth: usize,
        output_dim: usize,
        bbox: &Aabb,
        rng: &mut Rng,
    ) -> PosEncLinear {
        assert!(freqs >= 1 && depth >= 1);
        let feat = Self::feature_dim_for(freqs);
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let in_dim = if i == 0 { feat } else { hidden };
            let out_dim = if i + 1 == depth { output_dim } else { hidden };
            layers.push(Linear::init(in_dim, out_dim, rng));
        }
        let half = bbox.half_extent().max(1e-9);
        PosEncLinear {
            layers,
            freqs,
            center: bbox.center(),
            inv_half: 1.0 / half,
        }
    }

    pub(crate) fn from_parts(
        layers: Vec<Linear>,
        freqs: usize,
        center: Vec3,
        inv_half: f64,
    ) -> PosEncLinear {
        PosEncLinear {
            layers,
            freqs,
            center,
            inv_half,
        }
    }

    fn feature_dim_for(freqs: usize) -> usize {
        let per_axis = 2 * freqs;
        per_axis * per_axis * per_axis
    }

    pub fn feature_dim(&self) -> usize {
        Self::feature_dim_for(self.freqs)
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub(crate) fn freqs(&self) -> usize {
        self.freqs
    }

    pub(crate) fn center(&self) -> Vec3 {
        self.center
    }

    pub(crate) fn inv_half(&self) -> f64 {
        self.inv_half
    }

    /// Per-axis encoding values and derivatives w.r.t. the raw coordinate.
    fn axis_encoding(&self, coord: f64, center: f64) -> (Vec<f64>, Vec<f64>) {
        let a = (coord - center) * self.inv_half;
        let m = 2 * self.freqs;
        let mut vals = vec![0.0; m];
        let mut ders = vec![0.0; m];
        for k in 0..self.freqs {
            let scale = (1u64 << k) as f64 * PI;
            let arg = scale * a;
            let (s, c) = arg.sin_cos();
            vals[2 * k] = s;
            vals[2 * k + 1] = c;
            let d = scale * self.inv_half;
            ders[2 * k] = d * c;
            ders[2 * k + 1] = -d * s;
        }
        (vals, ders)
    }

    /// Kronecker-product features, one row per point.
    pub(crate) fn encode(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let m = 2 * self.freqs;
        let feat = self.feature_dim();
        let mut out = Array2::zeros((n, feat));
        for (r, p) in x.rows().into_iter().enumerate() {
            let (ex, _) = self.axis_encoding(p[0], self.center[0]);
            let (ey, _) = self.axis_encoding(p[1], self.center[1]);
            let (ez, _) = self.axis_encoding(p[2], self.center[2]);
            let mut row = out.row_mut(r);
            for i in 0..m {
                for j in 0..m {
                    let xy = ex[i] * ey[j];
                    let base = (i * m + j) * m;
                    for k in 0..m {
                        row[base + k] = xy * ez[k];
                    }
                }
            }
        }
        out
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let phi = self.encode(x);
        self.forward_encoded(&phi)
    }

    fn forward_encoded(&self, phi: &Array2<f64>) -> Array2<f64> {
        let mut h = phi.dot(&self.layers[0].w.t()) + &self.layers[0].b;
        for layer in self.layers.iter().skip(1) {
            h = h.dot(&layer.w.t()) + &layer.b;
        }
        h
    }

    pub(crate) fn forward_tape(&self, x: Array2<f64>) -> (Array2<f64>, Tape) {
        let phi = self.encode(&x);
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut h = phi.dot(&self.layers[0].w.t()) + &self.layers[0].b;
        for layer in self.layers.iter().skip(1) {
            hidden.push(h);
            h = hidden.last().unwrap().dot(&layer.w.t()) + &layer.b;
        }
        (
            h,
            Tape {
                input: x,
                encoded: Some(phi),
                hidden,
            },
        )
    }

    pub(crate) fn backward(&self, tape: Tape, upstream: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let phi = tape.encoded.as_ref().expect("posenc tape carries features");
        let mut grads = Gradients::zeros_like(&self.layers);
        let mut dz = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            let layer_input: &Array2<f64> = if i == 0 { phi } else { &tape.hidden[i - 1] };
            grads.layers[i].w = dz.t().dot(layer_input);
            grads.layers[i].b = dz.sum_axis(Axis(0));
            dz = dz.dot(&self.layers[i].w);
        }
        // dz now holds dL/d phi; chain through the encoding to raw coords.
        let n = tape.input.nrows();
        let m = 2 * self.freqs;
        let mut d_input = Array2::zeros((n, 3));
        for r in 0..n {
            let p = [tape.input[[r, 0]], tape.input[[r, 1]], tape.input[[r, 2]]];
            let (ex, dx) = self.axis_encoding(p[0], self.center[0]);
            let (ey, dy) = self.axis_encoding(p[1], self.center[1]);
            let (ez, dz_ax) = self.axis_encoding(p[2], self.center[2]);
            let mut acc = [0.0f64; 3];
            for i in 0..m {
                for j in 0..m {
                    let base = (i * m + j) * m;
                    for k in 0..m {
                        let g = dz[[r, base + k]];
                        if g != 0.0 {
                            acc[0] += g * dx[i] * ey[j] * ez[k];
                            acc[1] += g * ex[i] * dy[j] * ez[k];
                            acc[2] += g * ex[i] * ey[j] * dz_ax[k];
                        }
                    }
                }
            }
            for a in 0..3 {
                d_input[[r, a]] = acc[a];
            }
        }
        (grads, d_input)
    }
}
