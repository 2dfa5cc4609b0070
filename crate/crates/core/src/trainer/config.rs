use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{EpsilonSchedule, DEFAULT_Q_HIDDEN};
use crate::guesser::DEFAULT_GUESSER_HIDDEN;
use crate::nn::LrSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Accuracy => "accuracy",
        }
    }

    /// AUC for binary tasks, accuracy otherwise.
    pub fn for_classes(n_classes: usize) -> Self {
        if n_classes == 2 {
            Metric::Auc
        } else {
            Metric::Accuracy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStop {
    /// Improvement needed to reset the patience counter.
    pub min_delta: f64,
    /// Validation checks without such an improvement before stopping.
    pub patience_checks: u32,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            min_delta: 0.001,
            patience_checks: 20,
        }
    }
}

/// Training configuration. Every field has a default, so a JSON config file
/// only needs the entries it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Features per episode including the forced ones.
    pub k_features: usize,
    pub gamma: f64,
    pub episodes_max: u64,
    /// Episodes per alternation phase.
    pub phase_length: u64,
    /// Episodes between validation checks.
    pub eval_every: u64,
    /// Learning rate of both networks, ticking per episode.
    pub lr_schedule: LrSchedule,
    pub epsilon: EpsilonSchedule,
    pub oversample: bool,
    pub pretrain_guesser: bool,
    /// When false both networks update on every episode.
    pub alternate: bool,
    pub question_reward: bool,
    pub early_stop: EarlyStop,
    pub seed: u64,
    pub metric: Metric,

    pub guesser_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
    /// L2 penalty on Q-network weights.
    pub q_weight_decay: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Online-to-target copy period, in Q updates.
    pub target_sync_every: u64,
    pub guess_buffer_capacity: usize,
    pub guesser_batch_size: usize,
    pub pretrain_epochs: usize,
    pub pretrain_batch_size: usize,
    pub pretrain_learning_rate: f64,
    /// Also feed non-terminal states to the guesser buffer.
    pub fine_tune_intermediate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_features: 10,
            gamma: 0.95,
            episodes_max: 100_000,
            phase_length: 1000,
            eval_every: 1000,
            lr_schedule: LrSchedule::default(),
            epsilon: EpsilonSchedule::default(),
            oversample: true,
            pretrain_guesser: true,
            alternate: true,
            question_reward: true,
            early_stop: EarlyStop::default(),
            seed: 0,
            metric: Metric::Auc,
            guesser_hidden: DEFAULT_GUESSER_HIDDEN.to_vec(),
            q_hidden: DEFAULT_Q_HIDDEN.to_vec(),
            q_weight_decay: 1e-4,
            replay_capacity: 50_000,
            batch_size: 128,
            target_sync_every: 1000,
            guess_buffer_capacity: 10_000,
            guesser_batch_size: 128,
            pretrain_epochs: 10,
            pretrain_batch_size: 128,
            pretrain_learning_rate: 1e-3,
            fine_tune_intermediate: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, d: usize, n_forced: usize, n_classes: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_features <= n_forced {
            return bad(format!(
                "k_features ({}) must exceed the number of forced features ({n_forced})",
                self.k_features
            ));
        }
        if self.k_features > d {
            return bad(format!(
                "k_features ({}) exceeds the {d} available features",
                self.k_features
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.phase_length == 0 || self.eval_every == 0 {
            return bad("phase_length and eval_every must be > 0".into());
        }
        if self.batch_size == 0 || self.guesser_batch_size == 0 || self.pretrain_batch_size == 0 {
            return bad("batch sizes must be > 0".into());
        }
        if self.target_sync_every == 0 {
            return bad("target_sync_every must be > 0".into());
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must hold at least one batch".into());
        }
        if !(self.pretrain_learning_rate > 0.0) || !(self.q_weight_decay >= 0.0) {
            return bad("pretrain_learning_rate must be > 0 and q_weight_decay >= 0".into());
        }
        if self.metric == Metric::Auc && n_classes != 2 {
            return bad(format!(
                "AUC needs a binary task, table has {n_classes} classes"
            ));
        }
        self.lr_schedule.validate()?;
        self.epsilon.validate()?;
        Ok(())
    }

    /// Questions the agent may ask per episode.
    pub fn max_steps(&self, n_forced: usize) -> usize {
        self.k_features - n_forced
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults() {
        let c: TrainConfig =
            serde_json::from_str(r#"{"k_features": 5, "alternate": false}"#).unwrap();
        assert_eq!(c.k_features, 5);
        assert!(!c.alternate);
        assert_eq!(c.gamma, 0.95);
        assert_eq!(c.phase_length, 1000);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"k": 5}"#).is_err());
    }

    #[test]
    fn validation_rules() {
        let c = TrainConfig {
            k_features: 3,
            ..TrainConfig::default()
        };
        assert!(c.validate(10, 3, 2).is_err());
        assert!(c.validate(10, 2, 2).is_ok());
        assert!(c.validate(10, 2, 10).is_err());
        let c = TrainConfig {
            gamma: 0.0,
            k_features: 3,
            ..TrainConfig::default()
        };
        assert!(c.validate(10, 0, 2).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let b = TrainConfig {
            seed: 1,
            ..TrainConfig::default()
        };
        assert_eq!(a.hash(), TrainConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
