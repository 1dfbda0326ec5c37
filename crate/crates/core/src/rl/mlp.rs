//! Fully connected networks with hand-written reverse-mode gradients.
//!
//! Weights are stored `out × in`, so a batch `X` (rows are samples) maps to
//! `X·Wᵀ + b`. Hidden layers use ReLU; the output activation is configurable.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(&self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|x| x.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, given the layer's pre-activation and output.
    fn backprop(&self, grad: &mut Array2<f64>, pre: &Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Relu => ndarray::Zip::from(grad).and(pre).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => ndarray::Zip::from(grad).and(out).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Identity => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    output: Activation,
}

/// Activations recorded by [`Mlp::forward_batch`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`; the last entry is the network output.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Uniform fan-in initialization `U(−1/√fan_in, 1/√fan_in)` for weights and biases.
    pub fn new<R: Rng>(sizes: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|p| {
                let bound = 1.0 / (p[0] as f64).sqrt();
                let mut l = Layer::zeros(p[0], p[1]);
                l.weight.mapv_inplace(|_| rng.random_range(-bound..=bound));
                l.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
                l
            })
            .collect();
        Self { layers, output }
    }

    pub fn from_layers(layers: Vec<Layer>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(AdpError::InvalidParams("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(AdpError::ShapeMismatch {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(AdpError::ShapeMismatch {
                    expected: l.outputs(),
                    got: l.bias.len(),
                });
            }
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward_batch(x)?.output().row(0).to_vec())
    }

    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(input.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weight.t());
            z += &layer.bias;
            let mut a = z.clone();
            self.activation(l).apply(&mut a);
            pre.push(z);
            acts.push(a);
        }
        Ok(ForwardCache { acts, pre })
    }

    /// Reverse-mode pass for a batch. `upstream` is dLoss/dOutput per sample;
    /// parameter gradients are summed over the batch.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(AdpError::ShapeMismatch {
                expected: out.len(),
                got: upstream.len(),
            });
        }
        let mut grad = upstream.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            self.activation(l)
                .backprop(&mut grad, &cache.pre[l], &cache.acts[l + 1]);
            let weight = grad.t().dot(&cache.acts[l]);
            let bias = grad.sum_axis(Axis(0));
            let next = grad.dot(&self.layers[l].weight);
            layers.push(Layer { weight, bias });
            grad = next;
        }
        layers.reverse();
        Ok((MlpGrads { layers }, grad))
    }

    /// Single-sample gradients of `upstream · f(input)`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let cache = self.forward_batch(x)?;
        if upstream.len() != self.output_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row view");
        let (g, dx) = self.backward_batch(&cache, up)?;
        Ok((g, dx.row(0).to_vec()))
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(AdpError::ShapeMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// `self ← τ·online + (1 − τ)·self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.weight
                .zip_mut_with(&o.weight, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.bias.zip_mut_with(&o.bias, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }
}

impl MlpGrads {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight *= s;
            l.bias *= s;
        }
    }
}
