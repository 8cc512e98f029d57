//! Coordinate MLP: a stack of dense layers with an activation between all
//! but the last. Forward and backward are batched over point rows.

use ndarray::{Array2, Axis};

use super::{Activation, Gradients, Linear, Tape};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct Mlp {
    pub(crate) layers: Vec<Linear>,
    activation: Activation,
}

impl Mlp {
    pub(crate) fn init(
        input_dim: usize,
        hidden: usize,
        depth: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Mlp {
        assert!(depth >= 1, "depth counts linear layers and must be >= 1");
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let in_dim = if i == 0 { input_dim } else { hidden };
            let out_dim = if i + 1 == depth { output_dim } else { hidden };
            layers.push(Linear::init(in_dim, out_dim, rng));
        }
        Mlp { layers, activation }
    }

    pub(crate) fn from_layers(layers: Vec<Linear>, activation: Activation) -> Mlp {
        Mlp { layers, activation }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub(crate) fn activation(&self) -> Activation {
        self.activation
    }

    fn apply_activation(&self, z: &mut Array2<f64>) {
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        }
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.dot(&self.layers[0].w.t()) + &self.layers[0].b;
        if last > 0 {
            self.apply_activation(&mut h);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            let mut z = h.dot(&layer.w.t()) + &layer.b;
            if i < last {
                self.apply_activation(&mut z);
            }
            h = z;
        }
        h
    }

    pub(crate) fn forward_tape(&self, x: Array2<f64>) -> (Array2<f64>, Tape) {
        let last = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut h = x.dot(&self.layers[0].w.t()) + &self.layers[0].b;
        if last > 0 {
            self.apply_activation(&mut h);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            hidden.push(h);
            let prev = hidden.last().unwrap();
            let mut z = prev.dot(&layer.w.t()) + &layer.b;
            if i < last {
                self.apply_activation(&mut z);
            }
            h = z;
        }
        (
            h,
            Tape {
                input: x,
                encoded: None,
                hidden,
            },
        )
    }

    /// Backpropagates `upstream = dL/d output` through the taped batch.
    /// Returns parameter gradients and `dL/d input`.
    pub(crate) fn backward(&self, tape: Tape, upstream: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let last = self.layers.len() - 1;
        debug_assert_eq!(tape.hidden.len(), last);
        let mut grads = Gradients::zeros_like(&self.layers);
        // No activation after the last layer, so dZ = upstream directly.
        let mut dz = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            let layer_input: &Array2<f64> = if i == 0 { &tape.input } else { &tape.hidden[i - 1] };
            grads.layers[i].w = dz.t().dot(layer_input);
            grads.layers[i].b = dz.sum_axis(Axis(0));
            let mut dx = dz.dot(&self.layers[i].w);
            if i > 0 {
                // ReLU mask from the stored post-activation values.
                if self.activation == Activation::Relu {
                    let h = &tape.hidden[i - 1];
                    dx.zip_mut_with(h, |d, &hv| {
                        if hv <= 0.0 {
                            *d = 0.0;
                        }
                    });
                }
            }
            dz = dx;
        }
        (grads, dz)
    }
}
