//! The training loop: guesser pretraining, alternating agent/guesser phases,
//! periodic validation and best-checkpoint selection.

mod config;
mod episode;
mod evaluate;
mod sampler;

pub use config::{EarlyStop, Metric, TrainConfig};
pub use episode::{run_episode, EpisodeOutcome, EpisodeSetup, Mode};
pub use evaluate::{evaluate, evaluate_policy, EvalResult};
pub use sampler::PatientSampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ddqn_update, QNet, ReplayBuffer};
use crate::artifact::{ModelArtifact, ARTIFACT_FORMAT_VERSION};
use crate::dataset::{exploration_weights, ExplorationWeights, FeatureTable, NormStats, Splits};
use crate::env::EpisodeRules;
use crate::guesser::{GuessBuffer, Guesser};
use crate::nn::Optimizer;
use crate::{Error, Result};

/// Which network learns during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Agent,
    Guesser,
    /// Alternation disabled.
    Both,
}

impl Phase {
    pub fn agent_learns(self) -> bool {
        matches!(self, Phase::Agent | Phase::Both)
    }

    pub fn guesser_learns(self) -> bool {
        matches!(self, Phase::Guesser | Phase::Both)
    }
}

/// Per-episode bookkeeping returned by [`Trainer::train_episode`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub episode: u64,
    pub phase: Phase,
    pub epsilon: f64,
    pub row: usize,
    /// Sum of the rewards collected.
    pub total_reward: f64,
    pub n_questions: usize,
    pub q_loss: Option<f64>,
    pub guesser_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    EpisodesMax,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Episodes completed when the check ran.
    pub episode: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub metric: Metric,
    pub history: Vec<Check>,
    pub best_episode: u64,
    pub best_metric: f64,
    pub episodes_run: u64,
    pub stop_reason: StopReason,
    pub pretrain_losses: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Best validation checkpoint.
    pub artifact: ModelArtifact,
}

/// Stateful training loop over a normalized table. [`train`] drives it end to
/// end; tests step it one episode at a time.
#[derive(Debug)]
pub struct Trainer<'a> {
    config: TrainConfig,
    table: &'a FeatureTable,
    rules: EpisodeRules,
    rng: ChaCha8Rng,
    guesser: Guesser,
    qnet: QNet,
    q_opt: Optimizer,
    g_opt: Optimizer,
    replay: ReplayBuffer,
    guess_buffer: GuessBuffer,
    weights: ExplorationWeights,
    sampler: PatientSampler,
    episode: u64,
    q_updates: u64,
    pretrain_losses: Vec<f64>,
}

impl<'a> Trainer<'a> {
    /// Builds the networks and, if configured, pretrains the guesser.
    pub fn new(table: &'a FeatureTable, train_rows: &[usize], config: TrainConfig) -> Result<Self> {
        let d = table.n_features();
        let n_forced = table.forced_indices().len();
        config.validate(d, n_forced, table.n_classes())?;
        let sampler = PatientSampler::new(table, train_rows, config.oversample)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut guesser = Guesser::new(d, table.n_classes(), &config.guesser_hidden, &mut rng)?;
        let qnet = QNet::new(d, &config.q_hidden, &mut rng)?;
        let weights = exploration_weights(table, train_rows);

        let mut pretrain_losses = Vec::new();
        if config.pretrain_guesser && config.pretrain_epochs > 0 {
            let mut opt = Optimizer::adam(config.pretrain_learning_rate, 0.0)?;
            pretrain_losses = guesser.pretrain(
                table,
                &sampler,
                config.pretrain_epochs,
                config.pretrain_batch_size,
                &mut opt,
                &mut rng,
            )?;
        }
        let lr = config.lr_schedule.rate_at(0);
        Ok(Self {
            rules: EpisodeRules {
                max_steps: config.max_steps(n_forced),
                question_reward: config.question_reward,
            },
            q_opt: Optimizer::adam(lr, config.q_weight_decay)?,
            g_opt: Optimizer::adam(lr, 0.0)?,
            replay: ReplayBuffer::new(config.replay_capacity),
            guess_buffer: GuessBuffer::new(config.guess_buffer_capacity),
            config,
            table,
            rng,
            guesser,
            qnet,
            weights,
            sampler,
            episode: 0,
            q_updates: 0,
            pretrain_losses,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn rules(&self) -> EpisodeRules {
        self.rules
    }

    pub fn guesser(&self) -> &Guesser {
        &self.guesser
    }

    pub fn qnet(&self) -> &QNet {
        &self.qnet
    }

    pub fn exploration_weights(&self) -> &ExplorationWeights {
        &self.weights
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn guess_buffer(&self) -> &GuessBuffer {
        &self.guess_buffer
    }

    /// Episodes completed so far.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn q_updates(&self) -> u64 {
        self.q_updates
    }

    pub fn pretrain_losses(&self) -> &[f64] {
        &self.pretrain_losses
    }

    pub fn phase_of(&self, episode: u64) -> Phase {
        if !self.config.alternate {
            Phase::Both
        } else if (episode / self.config.phase_length).is_multiple_of(2) {
            Phase::Agent
        } else {
            Phase::Guesser
        }
    }

    /// Plays one training episode and applies the updates of its phase.
    pub fn train_episode(&mut self) -> Result<EpisodeReport> {
        let episode = self.episode;
        let phase = self.phase_of(episode);
        let lr = self.config.lr_schedule.rate_at(episode);
        self.q_opt.set_learning_rate(lr);
        self.g_opt.set_learning_rate(lr);
        if phase.guesser_learns() {
            self.guesser.unfreeze();
        } else {
            self.guesser.freeze();
        }

        let epsilon = self.config.epsilon.value(episode);
        let row = self.sampler.sample(&mut self.rng);
        let setup = EpisodeSetup {
            table: self.table,
            row,
            rules: self.rules,
            extra_random_unmask: false,
        };
        let mode = Mode::Train {
            epsilon,
            weights: &self.weights,
        };
        let out = run_episode(
            self.qnet.online(),
            &self.guesser,
            &setup,
            mode,
            &mut self.rng,
        )?;
        let total_reward = out.transitions.iter().map(|t| t.reward).sum();
        let n_questions = out.trace.questions.len();

        let label = self.table.label(row);
        if self.config.fine_tune_intermediate {
            for s in out.intermediate_states {
                self.guess_buffer.push(s, label);
            }
        }
        self.guess_buffer.push(out.guess_state, label);
        for t in out.transitions {
            self.replay.push(t);
        }

        let mut q_loss = None;
        if phase.agent_learns() {
            if let Some(batch) = self.replay.sample(self.config.batch_size, &mut self.rng) {
                q_loss = Some(ddqn_update(
                    &mut self.qnet,
                    &batch,
                    self.config.gamma,
                    &mut self.q_opt,
                )?);
                self.q_updates += 1;
                if self.q_updates.is_multiple_of(self.config.target_sync_every) {
                    self.qnet.sync_target();
                }
            }
        }
        let mut guesser_loss = None;
        if phase.guesser_learns() {
            if let Some((states, labels)) = self
                .guess_buffer
                .sample(self.config.guesser_batch_size, &mut self.rng)
            {
                guesser_loss = Some(self.guesser.fine_tune_step(
                    states.view(),
                    &labels,
                    &mut self.g_opt,
                )?);
            }
        }
        self.episode += 1;
        Ok(EpisodeReport {
            episode,
            phase,
            epsilon,
            row,
            total_reward,
            n_questions,
            q_loss,
            guesser_loss,
        })
    }

    /// Greedy evaluation of the current networks. Uses its own RNG so that
    /// checks do not perturb the training stream.
    pub fn validate(&self, rows: &[usize]) -> Result<EvalResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ self.episode.rotate_left(32));
        evaluate_policy(
            self.qnet.online(),
            &self.guesser,
            self.table,
            rows,
            self.rules,
            self.config.metric,
            false,
            &mut rng,
        )
    }

    /// Snapshot of the current networks as a model artifact.
    pub fn artifact(&self, validation_metric: Option<f64>) -> ModelArtifact {
        let d = self.table.n_features();
        ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            d,
            n_classes: self.table.n_classes(),
            feature_names: self.table.feature_names().to_vec(),
            forced_indices: self.table.forced_indices().to_vec(),
            label_column: None,
            norm_stats: self
                .table
                .norm_stats()
                .cloned()
                .unwrap_or_else(|| NormStats::identity(d)),
            k_features: self.config.k_features,
            question_reward: self.config.question_reward,
            guesser: self.guesser.net().clone(),
            q_network: self.qnet.online().clone(),
            exploration_weights: self.weights.weights.clone(),
            seed: self.config.seed,
            config_hash: self.config.hash(),
            validation_metric,
        }
    }
}

/// Normalizes `table` on the train rows, trains, and returns the
/// best-validation checkpoint.
pub fn train(table: &FeatureTable, splits: &Splits, config: &TrainConfig) -> Result<TrainOutcome> {
    if splits.validation.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let normalized = table.normalize(&splits.train)?;
    let mut trainer = Trainer::new(&normalized, &splits.train, config.clone())?;

    let mut history = Vec::new();
    let mut best: Option<(u64, f64, ModelArtifact)> = None;
    let mut reference = f64::NEG_INFINITY;
    let mut stale_checks = 0u32;
    let mut stop_reason = StopReason::EpisodesMax;

    while trainer.episode() < config.episodes_max {
        if let Err(e) = trainer.train_episode() {
            match e {
                Error::NonFinite(_) if best.is_some() => {
                    stop_reason = StopReason::NonFinite;
                    break;
                }
                other => return Err(other),
            }
        }
        let done = trainer.episode();
        let last = done == config.episodes_max;
        if done % config.eval_every != 0 && !last {
            continue;
        }
        let value = trainer.validate(&splits.validation)?.value;
        history.push(Check {
            episode: done,
            value,
        });
        if best.as_ref().is_none_or(|(_, b, _)| value > *b) {
            best = Some((done, value, trainer.artifact(Some(value))));
        }
        if value > reference + config.early_stop.min_delta {
            reference = value;
            stale_checks = 0;
        } else {
            stale_checks += 1;
            if stale_checks >= config.early_stop.patience_checks {
                stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }

    let (best_episode, best_metric, artifact) = match best {
        Some(b) => b,
        None => {
            // episodes_max == 0: score the untrained networks once.
            let value = trainer.validate(&splits.validation)?.value;
            history.push(Check { episode: 0, value });
            (0, value, trainer.artifact(Some(value)))
        }
    };
    let report = TrainReport {
        metric: config.metric,
        history,
        best_episode,
        best_metric,
        episodes_run: trainer.episode(),
        stop_reason,
        pretrain_losses: trainer.pretrain_losses().to_vec(),
        seed: config.seed,
        config_hash: config.hash(),
    };
    Ok(TrainOutcome { report, artifact })
}
