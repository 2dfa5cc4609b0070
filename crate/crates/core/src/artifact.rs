//! Trained model on disk: both networks plus the feature metadata needed to
//! replay episodes on raw data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, NormStats};
use crate::env::{EpisodeRules, Predictor};
use crate::nn::{Activation, Mlp};
use crate::{Error, Result};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

impl Predictor for Mlp {
    fn predict(&self, state_vector: &[f64]) -> Result<Vec<f64>> {
        self.forward(state_vector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub d: usize,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub forced_indices: Vec<usize>,
    #[serde(default)]
    pub label_column: Option<String>,
    pub norm_stats: NormStats,
    /// Total features per episode, forced ones included.
    pub k_features: usize,
    pub question_reward: bool,
    pub guesser: Mlp,
    pub q_network: Mlp,
    /// Exploration weights used while training (provenance only).
    pub exploration_weights: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
    /// Validation metric of this checkpoint.
    pub validation_metric: Option<f64>,
}

impl ModelArtifact {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != ARTIFACT_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format_version {} (expected {ARTIFACT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let d = self.d;
        if self.feature_names.len() != d || self.norm_stats.len() != d {
            return Err(Error::Shape(format!(
                "model declares {d} features but has {} names and {} scaling entries",
                self.feature_names.len(),
                self.norm_stats.len()
            )));
        }
        if self.guesser.input_dim() != 2 * d || self.q_network.input_dim() != 2 * d {
            return Err(Error::Shape("network inputs must be 2d wide".into()));
        }
        if self.q_network.output_dim() != d + 1 {
            return Err(Error::Shape(format!(
                "Q network has {} outputs, expected {}",
                self.q_network.output_dim(),
                d + 1
            )));
        }
        if self.guesser.output_dim() != self.n_classes {
            return Err(Error::Shape(format!(
                "guesser has {} outputs for {} classes",
                self.guesser.output_dim(),
                self.n_classes
            )));
        }
        if self.guesser.layers().last().map(|l| l.activation()) != Some(Activation::Softmax)
            || self.q_network.layers().last().map(|l| l.activation()) != Some(Activation::Sigmoid)
        {
            return Err(Error::InvalidConfig(
                "guesser must end in softmax and Q network in sigmoid".into(),
            ));
        }
        if self.forced_indices.iter().any(|&i| i >= d)
            || self.k_features <= self.forced_indices.len()
        {
            return Err(Error::InvalidConfig(format!(
                "k_features {} must exceed the {} forced features",
                self.k_features,
                self.forced_indices.len()
            )));
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        self.k_features - self.forced_indices.len()
    }

    pub fn rules(&self) -> EpisodeRules {
        EpisodeRules {
            max_steps: self.max_steps(),
            question_reward: self.question_reward,
        }
    }

    pub fn forced_names(&self) -> Vec<&str> {
        self.forced_indices
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    /// Checks feature names against a raw table and scales it with the
    /// model's training statistics.
    pub fn prepare_table(&self, raw: &FeatureTable) -> Result<FeatureTable> {
        if raw.feature_names() != self.feature_names.as_slice() {
            let first_diff = raw
                .feature_names()
                .iter()
                .zip(&self.feature_names)
                .position(|(a, b)| a != b);
            return Err(Error::ModelMismatch(match first_diff {
                Some(i) => format!(
                    "feature {i} is {:?} in the data but {:?} in the model",
                    raw.feature_names()[i],
                    self.feature_names[i]
                ),
                None => format!(
                    "data has {} features, model has {}",
                    raw.n_features(),
                    self.d
                ),
            }));
        }
        if raw.n_classes() > self.n_classes {
            return Err(Error::ModelMismatch(format!(
                "data has {} classes, model has {}",
                raw.n_classes(),
                self.n_classes
            )));
        }
        raw.clone()
            .with_forced_indices(self.forced_indices.clone())?
            .apply_norm_stats(&self.norm_stats)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        a.validate()?;
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
