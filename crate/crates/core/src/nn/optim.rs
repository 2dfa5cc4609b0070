//! Parameter updates and learning-rate schedules.

use serde::{Deserialize, Serialize};

use super::layer::Activation;
use super::mlp::{Gradients, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer with coupled L2 weight decay (`g + weight_decay * w`), applied
/// to weight matrices only.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    weight_decay: f64,
    step: u64,
    first: Option<Gradients>,
    second: Option<Gradients>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        let opt = Self {
            kind,
            learning_rate,
            weight_decay,
            step: 0,
            first: None,
            second: None,
        };
        opt.validate()?;
        Ok(opt)
    }

    pub fn sgd(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, weight_decay)
    }

    pub fn adam(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::default(), learning_rate, weight_decay)
    }

    fn validate(&self) -> Result<()> {
        // lr == 0 is accepted so that a frozen step can be expressed directly.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.kind {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "adam needs beta1, beta2 in [0,1) and eps > 0 (got {beta1}, {beta2}, {eps})"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients leave `net` untouched and are
    /// reported as [`Error::NonFinite`].
    pub fn apply_update(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len()
            || grads.layers.iter().zip(net.layers()).any(|(g, l)| {
                g.weights.dim() != l.weights().dim() || g.bias.len() != l.bias().len()
            })
        {
            return Err(Error::Shape(
                "gradients are not congruent with the network".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient; update skipped".into()));
        }
        if self.learning_rate == 0.0 {
            return Ok(());
        }
        self.step += 1;
        let lr = self.learning_rate;
        let wd = self.weight_decay;

        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                    let w = layer.weights_mut();
                    ndarray::Zip::from(w)
                        .and(&g.weights)
                        .for_each(|w, &g| *w -= lr * (g + wd * *w));
                    ndarray::Zip::from(layer.bias_mut())
                        .and(&g.bias)
                        .for_each(|b, &g| *b -= lr * g);
                    if layer.activation() == Activation::Prelu {
                        let a = layer.prelu_slope();
                        layer.set_prelu_slope(a - lr * g.prelu_slope);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let first = self.first.get_or_insert_with(|| Gradients::zeros_like(net));
                let second = self
                    .second
                    .get_or_insert_with(|| Gradients::zeros_like(net));
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let adam = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                };
                for (((layer, g), m), v) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut first.layers)
                    .zip(&mut second.layers)
                {
                    ndarray::Zip::from(layer.weights_mut())
                        .and(&g.weights)
                        .and(&mut m.weights)
                        .and(&mut v.weights)
                        .for_each(|w, &g, m, v| {
                            let g = g + wd * *w;
                            adam(w, g, m, v)
                        });
                    ndarray::Zip::from(layer.bias_mut())
                        .and(&g.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .for_each(|b, &g, m, v| adam(b, g, m, v));
                    if layer.activation() == Activation::Prelu {
                        let mut a = layer.prelu_slope();
                        adam(
                            &mut a,
                            g.prelu_slope,
                            &mut m.prelu_slope,
                            &mut v.prelu_slope,
                        );
                        layer.set_prelu_slope(a);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Step-decay schedule: `initial / divisor^(episode / period)`, never below `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub divisor: f64,
    pub period_episodes: u64,
    pub floor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-4,
            divisor: 10.0,
            period_episodes: 17_500,
            floor: 1e-6,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.initial >= self.floor) {
            return Err(Error::InvalidConfig(format!(
                "learning-rate schedule needs initial >= floor > 0 (got {} and {})",
                self.initial, self.floor
            )));
        }
        if !(self.divisor > 1.0) || self.period_episodes == 0 {
            return Err(Error::InvalidConfig(
                "learning-rate schedule needs divisor > 1 and period > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn rate_at(&self, episode: u64) -> f64 {
        let periods = (episode / self.period_episodes).min(i32::MAX as u64) as i32;
        (self.initial / self.divisor.powi(periods)).max(self.floor)
    }
}
