//! The guesser: a classifier over partially revealed states whose probability
//! of the true label is the terminal reward.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;

use crate::dataset::FeatureTable;
use crate::env::Predictor;
use crate::nn::{cross_entropy_batch, Activation, Mlp, Optimizer};
use crate::trainer::PatientSampler;
use crate::{Error, Result};

pub const DEFAULT_GUESSER_HIDDEN: [usize; 3] = [250, 250, 250];

#[derive(Debug, Clone, PartialEq)]
pub struct Guesser {
    net: Mlp,
    frozen: bool,
}

impl Guesser {
    /// `2d` inputs, PReLU hidden layers, softmax over `n_classes`.
    pub fn new<R: Rng + ?Sized>(
        d: usize,
        n_classes: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![2 * d];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let mut acts = vec![Activation::Prelu; hidden.len()];
        acts.push(Activation::Softmax);
        Self::from_net(Mlp::new(&sizes, &acts, rng)?)
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        let last = net.layers().last().map(|l| l.activation());
        if last != Some(Activation::Softmax) {
            return Err(Error::InvalidConfig(
                "guesser must end in a softmax layer".into(),
            ));
        }
        if !net.input_dim().is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "guesser input must be 2d wide, got {}",
                net.input_dim()
            )));
        }
        Ok(Self { net, frozen: false })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    pub fn n_features(&self) -> usize {
        self.net.input_dim() / 2
    }

    pub fn n_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn predict_batch(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.forward_batch(states)
    }

    fn ensure_trainable(&self) -> Result<()> {
        if self.frozen {
            return Err(Error::ContractViolation("guesser is frozen".into()));
        }
        Ok(())
    }

    /// One gradient step on mean cross-entropy; returns the loss before the step.
    pub fn fine_tune_step(
        &mut self,
        states: ArrayView2<f64>,
        labels: &[usize],
        opt: &mut Optimizer,
    ) -> Result<f64> {
        self.ensure_trainable()?;
        if labels.is_empty() {
            return Err(Error::ContractViolation("empty guesser batch".into()));
        }
        let tape = self.net.forward_tape(states)?;
        let (loss, grad) = cross_entropy_batch(tape.output().view(), labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("guesser loss {loss}")));
        }
        let grads = self.net.backward(&tape, grad.view())?;
        opt.apply_update(&mut self.net, &grads)?;
        Ok(loss)
    }

    /// Trains on fully revealed states (`values = row`, `asked = 1`) with
    /// minibatches drawn by `sampler`. Returns the mean loss of each epoch.
    pub fn pretrain<R: Rng + ?Sized>(
        &mut self,
        table: &FeatureTable,
        sampler: &PatientSampler,
        epochs: usize,
        batch_size: usize,
        opt: &mut Optimizer,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.ensure_trainable()?;
        if batch_size == 0 {
            return Err(Error::InvalidConfig(
                "pretrain batch size must be > 0".into(),
            ));
        }
        let d = table.n_features();
        if d != self.n_features() {
            return Err(Error::Shape(format!(
                "guesser expects {} features, table has {d}",
                self.n_features()
            )));
        }
        let steps = sampler.n_rows().div_ceil(batch_size);
        let mut epoch_losses = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let mut total = 0.0;
            for _ in 0..steps {
                let rows: Vec<usize> = (0..batch_size).map(|_| sampler.sample(rng)).collect();
                let states = full_feature_states(table, &rows);
                let labels: Vec<usize> = rows.iter().map(|&i| table.label(i)).collect();
                let loss =
                    self.fine_tune_step(states.view(), &labels, opt)
                        .map_err(|e| match e {
                            Error::NonFinite(msg) => {
                                Error::NonFinite(format!("pretrain epoch {epoch}: {msg}"))
                            }
                            other => other,
                        })?;
                total += loss;
            }
            epoch_losses.push(total / steps as f64);
        }
        Ok(epoch_losses)
    }
}

impl Predictor for Guesser {
    fn predict(&self, state_vector: &[f64]) -> Result<Vec<f64>> {
        if state_vector.len() != self.net.input_dim() {
            return Err(Error::Shape(format!(
                "state has length {}, guesser expects {}",
                state_vector.len(),
                self.net.input_dim()
            )));
        }
        self.net.forward(state_vector)
    }
}

/// States with every feature revealed.
pub fn full_feature_states(table: &FeatureTable, rows: &[usize]) -> Array2<f64> {
    let d = table.n_features();
    let mut states = Array2::ones((rows.len(), 2 * d));
    for (r, &i) in rows.iter().enumerate() {
        states
            .row_mut(r)
            .slice_mut(ndarray::s![..d])
            .assign(&table.row(i));
    }
    states
}

/// FIFO ring of `(state vector, true label)` pairs recorded at guess time.
#[derive(Debug, Clone)]
pub struct GuessBuffer {
    items: VecDeque<(Vec<f64>, usize)>,
    capacity: usize,
}

impl GuessBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, state: Vec<f64>, label: usize) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((state, label));
    }

    pub fn get(&self, i: usize) -> Option<&(Vec<f64>, usize)> {
        self.items.get(i)
    }

    /// Uniform sample without replacement of `min(batch, len)` entries, as a
    /// state matrix and label list.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch: usize,
        rng: &mut R,
    ) -> Option<(Array2<f64>, Vec<usize>)> {
        if self.items.is_empty() || batch == 0 {
            return None;
        }
        let k = batch.min(self.items.len());
        let width = self.items[0].0.len();
        let idx = sample(rng, self.items.len(), k);
        let mut states = Array2::zeros((k, width));
        let mut labels = Vec::with_capacity(k);
        for (r, i) in idx.iter().enumerate() {
            let (s, y) = &self.items[i];
            states
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(s.as_slice()));
            labels.push(*y);
        }
        Some((states, labels))
    }
}
