//! Multilayer perceptron over fixed-length view descriptors with a manual
//! forward/backward pass. Hidden layers use tanh, the output layer is
//! linear, and the output is optionally projected onto the unit sphere so
//! squared distances stay in [0, 4].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer: `out_dim x in_dim` row-major weights plus a bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// layer_dims needs at least an input and an output dimension, all > 0.
    BadLayerDims,
    BadMargin { margin: f64 },
    ShapeMismatch { layer: usize, detail: String },
    NonFiniteParameter { layer: usize },
    DimensionMismatch { expected: usize, got: usize },
    NonFiniteInput,
    /// Normalization of an (almost) all-zero embedding.
    ZeroNorm,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::BadLayerDims => {
                write!(f, "layer_dims must list at least [input, output], all positive")
            }
            ModelError::BadMargin { margin } => {
                write!(f, "margin must be positive and finite, got {margin}")
            }
            ModelError::ShapeMismatch { layer, detail } => {
                write!(f, "layer {layer} shape mismatch: {detail}")
            }
            ModelError::NonFiniteParameter { layer } => {
                write!(f, "layer {layer} contains a non-finite parameter")
            }
            ModelError::DimensionMismatch { expected, got } => {
                write!(f, "descriptor length {got}, model expects {expected}")
            }
            ModelError::NonFiniteInput => write!(f, "descriptor contains non-finite entries"),
            ModelError::ZeroNorm => {
                write!(f, "cannot normalize an all-zero embedding")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// Metric embedding model: descriptor in, embedding out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    normalize_output: bool,
    margin_alpha: f64,
    layers: Vec<Layer>,
}

impl EmbeddingModel {
    /// Fresh model with Xavier-uniform weights drawn from the given seed.
    pub fn seeded(
        layer_dims: &[usize],
        normalize_output: bool,
        margin_alpha: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_dims.len().saturating_sub(1));
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-scale..scale))
                .collect();
            layers.push(Layer {
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        Self::from_parts(
            layer_dims.to_vec(),
            layers,
            Activation::Tanh,
            normalize_output,
            margin_alpha,
        )
    }

    /// Builds a model from explicit parts, validating shape consistency.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        layers: Vec<Layer>,
        hidden_activation: Activation,
        normalize_output: bool,
        margin_alpha: f64,
    ) -> Result<Self, ModelError> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(ModelError::BadLayerDims);
        }
        if !(margin_alpha.is_finite() && margin_alpha > 0.0) {
            return Err(ModelError::BadMargin {
                margin: margin_alpha,
            });
        }
        if layers.len() != layer_dims.len() - 1 {
            return Err(ModelError::ShapeMismatch {
                layer: layers.len(),
                detail: format!(
                    "expected {} layers for {} dims",
                    layer_dims.len() - 1,
                    layer_dims.len()
                ),
            });
        }
        for (l, (layer, w)) in layers.iter().zip(layer_dims.windows(2)).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            if layer.weights.len() != fan_in * fan_out {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    detail: format!(
                        "weights {} != {}x{}",
                        layer.weights.len(),
                        fan_out,
                        fan_in
                    ),
                });
            }
            if layer.bias.len() != fan_out {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    detail: format!("bias {} != {}", layer.bias.len(), fan_out),
                });
            }
            let finite = layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(ModelError::NonFiniteParameter { layer: l });
            }
        }
        Ok(Self {
            layer_dims,
            hidden_activation,
            normalize_output,
            margin_alpha,
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn normalize_output(&self) -> bool {
        self.normalize_output
    }

    pub fn margin_alpha(&self) -> f64 {
        self.margin_alpha
    }

    fn check_input(&self, descriptor: &[f64]) -> Result<(), ModelError> {
        if descriptor.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: descriptor.len(),
            });
        }
        if descriptor.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        Ok(())
    }

    /// Deterministic forward pass.
    pub fn embed(&self, descriptor: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.forward_trace(descriptor)?.output)
    }

    /// Forward pass that keeps the intermediates needed for backprop.
    pub(crate) fn forward_trace(&self, descriptor: &[f64]) -> Result<ForwardTrace, ModelError> {
        self.check_input(descriptor)?;
        let depth = self.layers.len();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(depth);
        activations.push(descriptor.to_vec());

        for (l, layer) in self.layers.iter().enumerate() {
            let fan_in = self.layer_dims[l];
            let input = &activations[l];
            let mut z = layer.bias.clone();
            for (o, z_o) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                *z_o += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            }
            let a = if l + 1 == depth {
                z.clone()
            } else {
                z.iter().map(|&v| self.hidden_activation.apply(v)).collect()
            };
            preacts.push(z);
            activations.push(a);
        }

        let raw = activations.last().unwrap().clone();
        let (output, prenorm_norm) = if self.normalize_output {
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(ModelError::ZeroNorm);
            }
            (raw.iter().map(|v| v / norm).collect(), norm)
        } else {
            (raw, 1.0)
        };

        Ok(ForwardTrace {
            activations,
            preacts,
            prenorm_norm,
            output,
        })
    }

    /// Accumulates dL/dparams into `grads` given dL/d(output).
    pub(crate) fn backward(
        &self,
        trace: &ForwardTrace,
        d_output: &[f64],
        grads: &mut Gradients,
    ) {
        let depth = self.layers.len();
        let mut da: Vec<f64> = if self.normalize_output {
            // y = x / ||x||  =>  dx = (dy - y (y . dy)) / ||x||
            let y = &trace.output;
            let dot: f64 = y.iter().zip(d_output).map(|(a, b)| a * b).sum();
            y.iter()
                .zip(d_output)
                .map(|(yi, dyi)| (dyi - yi * dot) / trace.prenorm_norm)
                .collect()
        } else {
            d_output.to_vec()
        };

        for l in (0..depth).rev() {
            let fan_in = self.layer_dims[l];
            let z = &trace.preacts[l];
            let dz: Vec<f64> = if l + 1 == depth {
                da.clone()
            } else {
                da.iter()
                    .zip(z)
                    .map(|(d, &zv)| d * self.hidden_activation.derivative(zv))
                    .collect()
            };
            let input = &trace.activations[l];
            let g = &mut grads.layers[l];
            for (o, dz_o) in dz.iter().enumerate() {
                let row = &mut g.weights[o * fan_in..(o + 1) * fan_in];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += dz_o * x;
                }
                g.bias[o] += dz_o;
            }
            if l > 0 {
                let weights = &self.layers[l].weights;
                let mut prev = vec![0.0; fan_in];
                for (o, dz_o) in dz.iter().enumerate() {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += dz_o * w;
                    }
                }
                da = prev;
            }
        }
    }

    pub(crate) fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Copy of the model with a single weight nudged by `delta`; exists for
    /// finite-difference checks against the analytic gradients.
    pub fn with_perturbed_weight(&self, layer: usize, index: usize, delta: f64) -> EmbeddingModel {
        let mut out = self.clone();
        out.layers[layer].weights[index] += delta;
        out
    }

    /// Copy of the model with a single bias nudged by `delta`.
    pub fn with_perturbed_bias(&self, layer: usize, index: usize, delta: f64) -> EmbeddingModel {
        let mut out = self.clone();
        out.layers[layer].bias[index] += delta;
        out
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }
}

/// Intermediates from one forward pass.
pub(crate) struct ForwardTrace {
    /// activations[0] is the input; activations[l+1] the output of layer l.
    pub activations: Vec<Vec<f64>>,
    pub preacts: Vec<Vec<f64>>,
    pub prenorm_norm: f64,
    pub output: Vec<f64>,
}

/// Per-parameter gradient buffers mirroring the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w *= factor);
            layer.bias.iter_mut().for_each(|b| *b *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}
