//! Feed-forward network built from [`DenseLayer`]s.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layer::{Activation, DenseLayer};
use crate::{Error, Result};

pub const MLP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpDocument", try_from = "MlpDocument")]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Mlp::forward_tape`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub prelu_slope: f64,
}

/// Gradients congruent with an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                    prelu_slope: 0.0,
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.prelu_slope.is_finite()
                && l.weights.iter().all(|v| v.is_finite())
                && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Flattened in the same order as [`Mlp::params`].
    pub fn flatten(&self, net: &Mlp) -> Vec<f64> {
        let mut out = Vec::new();
        for (g, l) in self.layers.iter().zip(&net.layers) {
            out.extend(g.weights.iter());
            out.extend(g.bias.iter());
            if l.activation == Activation::Prelu {
                out.push(g.prelu_slope);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| {
                l.weights
                    .iter()
                    .chain(l.bias.iter())
                    .chain(std::iter::once(&l.prelu_slope))
            })
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Mlp {
    /// Builds a network from layer sizes `[in, h1, ..., out]`; `activations`
    /// has one entry per weight layer.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be > 0".into()));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one layer".into(),
            ));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.activation == Activation::Softmax && k + 1 != layers.len() {
                return Err(Error::InvalidConfig(format!(
                    "softmax is only allowed on the last layer (found on layer {k})"
                )));
            }
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape(format!(
                    "layer {k} bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.out_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs)?;
        let mut a = self.layers[0].activate(&self.layers[0].affine(inputs));
        for layer in &self.layers[1..] {
            a = layer.activate(&layer.affine(a.view()));
        }
        Ok(a)
    }

    pub fn forward_tape(&self, inputs: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(inputs)?;
        let mut tape_inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = inputs.to_owned();
        for layer in &self.layers {
            let z = layer.affine(a.view());
            let next = layer.activate(&z);
            tape_inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(Tape {
            inputs: tape_inputs,
            pre,
            output: a,
        })
    }

    /// Backpropagates `grad_output` (dL/d output, one row per sample) through
    /// the activations recorded in `tape`. Gradients are summed over the batch.
    pub fn backward(&self, tape: &Tape, grad_output: ArrayView2<f64>) -> Result<Gradients> {
        if tape.pre.len() != self.layers.len()
            || tape
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.ncols() != l.out_dim())
        {
            return Err(Error::ContractViolation(
                "tape was not recorded by a forward pass of this network".into(),
            ));
        }
        if grad_output.dim() != tape.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, forward output was {:?}",
                grad_output.dim(),
                tape.output.dim()
            )));
        }

        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut delta = grad_output.to_owned();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let out = if k + 1 < n {
                &tape.inputs[k + 1]
            } else {
                &tape.output
            };
            let (dz, d_slope) = layer.activation_backward(&tape.pre[k], out, delta.view());
            let dw = layer.weight_grad(&dz, tape.inputs[k].view());
            let db = DenseLayer::bias_grad(&dz);
            if k > 0 {
                delta = dz.dot(&layer.weights);
            }
            grads.push(LayerGradients {
                weights: dw,
                bias: db,
                prelu_slope: d_slope,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    fn check_input(&self, inputs: ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.len() + l.bias.len() + usize::from(l.activation == Activation::Prelu)
            })
            .sum()
    }

    /// All parameters flattened: per layer, weights row-major, biases, then
    /// the PReLU slope when present.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
            if l.activation == Activation::Prelu {
                out.push(l.prelu_slope);
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
            if l.activation == Activation::Prelu {
                l.prelu_slope = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// SHA-256 over the bit patterns of every parameter.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in self.params() {
            h.update(p.to_bits().to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MlpDocument {
    format_version: u32,
    layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDocument {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prelu_slope: Option<f64>,
}

impl From<Mlp> for MlpDocument {
    fn from(net: Mlp) -> Self {
        MlpDocument {
            format_version: MLP_FORMAT_VERSION,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerDocument {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    prelu_slope: (l.activation == Activation::Prelu).then_some(l.prelu_slope),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpDocument> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDocument) -> Result<Self> {
        if doc.format_version != MLP_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported network format_version {} (expected {MLP_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.out_dim, l.in_dim), l.weights)
                    .map_err(|e| Error::Shape(format!("layer weights: {e}")))?;
                Ok(DenseLayer::from_parts(
                    weights,
                    Array1::from(l.bias),
                    l.activation,
                    l.prelu_slope.unwrap_or(super::layer::PRELU_INIT_SLOPE),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers)
    }
}
