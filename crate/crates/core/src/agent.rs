//! Double-DQN agent over the `d + 1` question/guess actions.
//!
//! The Q head is a sigmoid, so every live Q value is strictly positive and a
//! multiplicative zero mask is enough to rule out already-asked questions.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ExplorationWeights;
use crate::env::{Action, EpisodeState};
use crate::nn::{Activation, Mlp, Optimizer};
use crate::{Error, Result};

pub const DEFAULT_Q_HIDDEN: [usize; 2] = [128, 128];

/// Online network plus its periodically synced target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    online: Mlp,
    target: Mlp,
}

impl QNet {
    /// `2d` inputs, ReLU hidden layers, `d + 1` sigmoid outputs.
    pub fn new<R: Rng + ?Sized>(d: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![2 * d];
        sizes.extend_from_slice(hidden);
        sizes.push(d + 1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Sigmoid);
        Self::from_online(Mlp::new(&sizes, &acts, rng)?)
    }

    pub fn from_online(online: Mlp) -> Result<Self> {
        if online.layers().last().map(|l| l.activation()) != Some(Activation::Sigmoid) {
            return Err(Error::InvalidConfig(
                "Q network must end in a sigmoid layer".into(),
            ));
        }
        if online.input_dim() != 2 * (online.output_dim() - 1) {
            return Err(Error::Shape(format!(
                "Q network maps {} inputs to {} actions; expected 2d -> d+1",
                online.input_dim(),
                online.output_dim()
            )));
        }
        Ok(Self {
            target: online.clone(),
            online,
        })
    }

    pub fn n_features(&self) -> usize {
        self.online.output_dim() - 1
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    /// Copies the online parameters into the target network.
    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    pub fn into_online(self) -> Mlp {
        self.online
    }

    /// Online Q values with asked questions zeroed.
    pub fn masked_q(&self, state_vector: &[f64], asked: &[bool]) -> Result<Vec<f64>> {
        Ok(mask_q(&self.online.forward(state_vector)?, asked))
    }

    /// Same as [`QNet::masked_q`] but evaluated with the target network.
    pub fn masked_q_target(&self, state_vector: &[f64], asked: &[bool]) -> Result<Vec<f64>> {
        Ok(mask_q(&self.target.forward(state_vector)?, asked))
    }

    /// Greedy action at `state`.
    pub fn greedy(&self, state: &EpisodeState) -> Result<Action> {
        greedy_action(&self.online, state)
    }
}

/// Greedy action of an online Q network: argmax of the masked Q values.
pub fn greedy_action(online: &Mlp, state: &EpisodeState) -> Result<Action> {
    let q = mask_q(&online.forward(&state.to_vector())?, state.asked());
    Ok(Action::from_index(
        masked_argmax(&q, &state.action_mask()),
        state.d(),
    ))
}

/// `q[i] * (1 - asked[i])` for questions; the guess entry is never masked.
pub fn mask_q(raw: &[f64], asked: &[bool]) -> Vec<f64> {
    raw.iter()
        .enumerate()
        .map(|(i, &q)| if i < asked.len() && asked[i] { 0.0 } else { q })
        .collect()
}

/// Argmax over valid actions, ties to the lowest index. Matches the plain
/// argmax of masked Q values whenever the live values are positive.
pub fn masked_argmax(q: &[f64], valid: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if valid[i] && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(q.len() - 1)
}

/// Epsilon-greedy choice. Exploration draws from `weights` restricted to the
/// valid actions, falling back to uniform when the restriction sums to zero.
pub fn select_action<R: Rng + ?Sized>(
    online: &Mlp,
    state: &EpisodeState,
    epsilon: f64,
    weights: &ExplorationWeights,
    rng: &mut R,
) -> Result<Action> {
    let d = state.d();
    if weights.len() != d + 1 {
        return Err(Error::Shape(format!(
            "{} exploration weights for {} actions",
            weights.len(),
            d + 1
        )));
    }
    let valid = state.action_mask();
    if rng.gen::<f64>() < epsilon {
        return Ok(Action::from_index(
            weighted_valid_draw(&weights.weights, &valid, rng),
            d,
        ));
    }
    greedy_action(online, state)
}

fn weighted_valid_draw<R: Rng + ?Sized>(weights: &[f64], valid: &[bool], rng: &mut R) -> usize {
    let restricted: Vec<f64> = weights
        .iter()
        .zip(valid)
        .map(|(&w, &ok)| if ok { w.max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = restricted.iter().sum();
    if !(total > 0.0) {
        let live: Vec<usize> = (0..valid.len()).filter(|&i| valid[i]).collect();
        return live[rng.gen_range(0..live.len())];
    }
    let mut r = rng.gen::<f64>() * total;
    let mut last_live = valid.len() - 1;
    for (i, &w) in restricted.iter().enumerate() {
        if w > 0.0 {
            if r < w {
                return i;
            }
            r -= w;
            last_live = i;
        }
    }
    last_live
}

/// One replay record. A guess leaves the state unchanged, so terminal
/// transitions carry `next_state == state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Valid actions at `next_state`.
    pub next_mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
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

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform sample without replacement; `None` until `batch` records exist.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some(
            sample(rng, self.items.len(), batch)
                .iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

/// Linear decay from `start` to `end` over `decay_episodes`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            decay_episodes: 20_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.end && self.end <= self.start && self.start <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon schedule needs 0 <= end <= start <= 1 (got {} -> {})",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn value(&self, episode: u64) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    let n = flat.len() / width.max(1);
    Array2::from_shape_vec((n, width), flat).expect("rows have equal width")
}

fn check_batch(qnet: &QNet, batch: &[&Transition], gamma: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::ContractViolation("empty transition batch".into()));
    }
    // gamma = 0 is accepted: it reduces every target to the immediate reward.
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!(
            "gamma must be in [0, 1], got {gamma}"
        )));
    }
    let width = qnet.online.input_dim();
    let n_actions = qnet.online.output_dim();
    for t in batch {
        if t.state.len() != width || t.next_state.len() != width || t.next_mask.len() != n_actions {
            return Err(Error::Shape(
                "transition does not match the Q network".into(),
            ));
        }
        if t.action >= n_actions {
            return Err(Error::ContractViolation(format!(
                "action {} out of range",
                t.action
            )));
        }
        if !t.reward.is_finite() {
            return Err(Error::NonFinite(format!("reward {}", t.reward)));
        }
    }
    Ok(())
}

/// Bootstrap value of each non-terminal next state; `evaluate` picks the
/// value from online and target rows.
fn bootstrap_targets(
    qnet: &QNet,
    batch: &[&Transition],
    gamma: f64,
    evaluate: impl Fn(ArrayView1<f64>, ArrayView1<f64>, &[bool]) -> f64,
) -> Result<Vec<f64>> {
    check_batch(qnet, batch, gamma)?;
    let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminal).collect();
    let mut targets: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if live.is_empty() || gamma == 0.0 {
        return Ok(targets);
    }
    let width = qnet.online.input_dim();
    let next = stack(live.iter().map(|&i| batch[i].next_state.clone()), width);
    let q_online = qnet.online.forward_batch(next.view())?;
    let q_target = qnet.target.forward_batch(next.view())?;
    for (r, &i) in live.iter().enumerate() {
        let v = evaluate(q_online.row(r), q_target.row(r), &batch[i].next_mask);
        targets[i] += gamma * v;
    }
    Ok(targets)
}

/// Double-DQN regression targets: the online network picks the next action
/// among valid ones and the target network scores it.
pub fn ddqn_targets(qnet: &QNet, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    bootstrap_targets(qnet, batch, gamma, |online, target, mask| {
        let a_star = masked_argmax(online.as_slice().unwrap_or(&online.to_vec()), mask);
        target[a_star]
    })
}

/// Plain DQN targets (max of the target network over valid actions), kept
/// for comparison with [`ddqn_targets`].
pub fn dqn_targets(qnet: &QNet, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    bootstrap_targets(qnet, batch, gamma, |_, target, mask| {
        let t = target.to_vec();
        t[masked_argmax(&t, mask)]
    })
}

/// One gradient step of mean squared TD error against [`ddqn_targets`] on the
/// online network. Returns the loss before the step.
pub fn ddqn_update(
    qnet: &mut QNet,
    batch: &[&Transition],
    gamma: f64,
    opt: &mut Optimizer,
) -> Result<f64> {
    let targets = ddqn_targets(qnet, batch, gamma)?;
    let width = qnet.online.input_dim();
    let states = stack(batch.iter().map(|t| t.state.clone()), width);
    let tape = qnet.online.forward_tape(states.view())?;
    let q = tape.output();
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (b, (t, &y)) in batch.iter().zip(&targets).enumerate() {
        let diff = q[[b, t.action]] - y;
        loss += diff * diff;
        grad[[b, t.action]] = 2.0 * diff / n;
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("Q loss {loss}")));
    }
    let grads = qnet.online.backward(&tape, grad.view())?;
    opt.apply_update(&mut qnet.online, &grads)?;
    Ok(loss)
}
