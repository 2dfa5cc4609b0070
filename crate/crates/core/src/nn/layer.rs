//! Dense layer and activation functions.
//!
//! A layer computes `z = x W^T + b` for a batch `x` (rows are samples) and then
//! applies its activation row-wise. Weights are stored row-major with shape
//! `(out_dim, in_dim)`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Initial slope of every PReLU layer.
pub const PRELU_INIT_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Leaky rectifier with one learnable slope shared by the whole layer.
    Prelu,
    Sigmoid,
    /// Row-wise softmax. Only valid on the last layer.
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Prelu => "prelu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn prelu(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

/// Numerically stable softmax of a single row.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
    pub(crate) activation: Activation,
    pub(crate) prelu_slope: f64,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let weights = Array2::from_shape_fn((out_dim, in_dim), |_| dist.sample(rng));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
            prelu_slope: PRELU_INIT_SLOPE,
        }
    }

    pub fn from_parts(
        weights: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
        prelu_slope: f64,
    ) -> Self {
        Self {
            weights: weights.as_standard_layout().into_owned(),
            bias,
            activation,
            prelu_slope,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn prelu_slope(&self) -> f64 {
        self.prelu_slope
    }

    pub fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    pub fn set_prelu_slope(&mut self, slope: f64) {
        self.prelu_slope = slope;
    }

    /// Pre-activation `x W^T + b`.
    pub(crate) fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = if is_sparse(x) {
            let mut z = Array2::zeros((x.nrows(), self.out_dim()));
            for (r, row) in x.outer_iter().enumerate() {
                let mut zr = z.row_mut(r);
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        zr.scaled_add(v, &self.weights.column(j));
                    }
                }
            }
            z
        } else {
            x.dot(&self.weights.t())
        };
        z += &self.bias;
        z
    }

    pub(crate) fn activate(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Prelu => {
                let a = self.prelu_slope;
                z.mapv(|v| prelu(v, a))
            }
            Activation::Sigmoid => z.mapv(sigmoid),
            Activation::Softmax => {
                let mut out = Array2::zeros(z.raw_dim());
                for (zr, mut or) in z.outer_iter().zip(out.outer_iter_mut()) {
                    let s = softmax(&zr.to_vec());
                    or.assign(&Array1::from(s));
                }
                out
            }
        }
    }

    /// Gradient at the pre-activation given the gradient at the output.
    /// Returns `(dz, d_slope)`; `d_slope` is zero unless the layer is PReLU.
    pub(crate) fn activation_backward(
        &self,
        z: &Array2<f64>,
        out: &Array2<f64>,
        grad_out: ArrayView2<f64>,
    ) -> (Array2<f64>, f64) {
        match self.activation {
            Activation::Identity => (grad_out.to_owned(), 0.0),
            Activation::Relu => {
                let mut dz = grad_out.to_owned();
                Zip::from(&mut dz).and(z).for_each(|d, &zv| {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                });
                (dz, 0.0)
            }
            Activation::Prelu => {
                let a = self.prelu_slope;
                let mut dz = grad_out.to_owned();
                let mut d_slope = 0.0;
                Zip::from(&mut dz).and(z).for_each(|d, &zv| {
                    if zv <= 0.0 {
                        d_slope += *d * zv;
                        *d *= a;
                    }
                });
                (dz, d_slope)
            }
            Activation::Sigmoid => {
                let mut dz = grad_out.to_owned();
                Zip::from(&mut dz)
                    .and(out)
                    .for_each(|d, &s| *d *= s * (1.0 - s));
                (dz, 0.0)
            }
            Activation::Softmax => {
                let mut dz = grad_out.to_owned();
                for (mut dr, sr) in dz.outer_iter_mut().zip(out.outer_iter()) {
                    let dot = dr.dot(&sr);
                    Zip::from(&mut dr)
                        .and(&sr)
                        .for_each(|d, &s| *d = s * (*d - dot));
                }
                (dz, 0.0)
            }
        }
    }

    /// `dz^T x`, exploiting zeros in `x`.
    pub(crate) fn weight_grad(&self, dz: &Array2<f64>, x: ArrayView2<f64>) -> Array2<f64> {
        if is_sparse(x) {
            let mut dw = Array2::zeros(self.weights.raw_dim());
            for (r, row) in x.outer_iter().enumerate() {
                let dzr = dz.row(r);
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        dw.column_mut(j).scaled_add(v, &dzr);
                    }
                }
            }
            dw
        } else {
            dz.t().dot(&x)
        }
    }

    pub(crate) fn bias_grad(dz: &Array2<f64>) -> Array1<f64> {
        dz.sum_axis(Axis(0))
    }
}

/// Masked episode states are mostly zeros; below a quarter density the
/// column-accumulation path beats a dense product.
fn is_sparse(x: ArrayView2<f64>) -> bool {
    let nnz = x.iter().filter(|v| **v != 0.0).count();
    nnz * 4 < x.len()
}
