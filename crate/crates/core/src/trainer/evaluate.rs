use rand::Rng;
use serde::Serialize;

use super::episode::{run_episode, EpisodeSetup, Mode};
use super::Metric;
use crate::artifact::ModelArtifact;
use crate::dataset::FeatureTable;
use crate::env::{EpisodeRules, Predictor};
use crate::metrics::{accuracy, roc_auc, ScoredLabels};
use crate::nn::Mlp;
use crate::trace::EpisodeTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
    #[serde(skip)]
    pub traces: Vec<EpisodeTrace>,
}

/// Runs the greedy policy once per row and scores the final guesses.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy<G: Predictor + ?Sized, R: Rng + ?Sized>(
    q_online: &Mlp,
    guesser: &G,
    table: &FeatureTable,
    rows: &[usize],
    rules: EpisodeRules,
    metric: Metric,
    off_policy: bool,
    rng: &mut R,
) -> Result<EvalResult> {
    if rows.is_empty() {
        return Err(Error::Data("no rows to evaluate".into()));
    }
    let mut traces = Vec::with_capacity(rows.len());
    for &row in rows {
        let setup = EpisodeSetup {
            table,
            row,
            rules,
            extra_random_unmask: off_policy,
        };
        traces.push(run_episode(q_online, guesser, &setup, Mode::Greedy, rng)?.trace);
    }
    let labels: Vec<usize> = rows.iter().map(|&r| table.label(r)).collect();
    let value = score(&traces, &labels, metric)?;
    Ok(EvalResult {
        metric,
        value,
        n: rows.len(),
        traces,
    })
}

fn score(traces: &[EpisodeTrace], labels: &[usize], metric: Metric) -> Result<f64> {
    let guesses = traces
        .iter()
        .map(|t| t.guess.as_ref().expect("episodes end in a guess"));
    match metric {
        Metric::Auc => {
            let scores: Vec<f64> = guesses
                .map(|g| g.distribution.get(1).copied().unwrap_or(f64::NAN))
                .collect();
            roc_auc(&ScoredLabels::from_classes(scores, labels)?)
        }
        Metric::Accuracy => {
            let predicted: Vec<usize> = guesses.map(|g| g.predicted_class).collect();
            accuracy(&predicted, labels)
        }
    }
}

/// Evaluates a saved model on rows of an already prepared table.
pub fn evaluate<R: Rng + ?Sized>(
    model: &ModelArtifact,
    prepared: &FeatureTable,
    rows: &[usize],
    off_policy: bool,
    rng: &mut R,
) -> Result<EvalResult> {
    evaluate_policy(
        &model.q_network,
        &model.guesser,
        prepared,
        rows,
        model.rules(),
        Metric::for_classes(model.n_classes),
        off_policy,
        rng,
    )
}
