//! ROC AUC, accuracy and trace statistics.

use serde::{Deserialize, Serialize};

use crate::trace::EpisodeTrace;
use crate::{Error, Result};

/// Scores paired with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::NonFinite("NaN score".into()));
        }
        Ok(Self { scores, labels })
    }

    /// Labels given as class indices; class 1 is positive.
    pub fn from_classes(scores: Vec<f64>, classes: &[usize]) -> Result<Self> {
        if let Some(&c) = classes.iter().find(|&&c| c > 1) {
            return Err(Error::Data(format!(
                "AUC needs binary labels, found class {c}"
            )));
        }
        Self::new(scores, classes.iter().map(|&c| c == 1).collect())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half. `O(n log n)`.
pub fn roc_auc(sl: &ScoredLabels) -> Result<f64> {
    let n_pos = sl.labels.iter().filter(|&&l| l).count();
    let n_neg = sl.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..sl.scores.len()).collect();
    order.sort_by(|&a, &b| sl.scores[a].total_cmp(&sl.scores[b]));

    // Twice the Mann-Whitney U, kept integral so the result is exact.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = sl.scores[order[i]];
        let (mut pos, mut neg) = (0u128, 0u128);
        let mut j = i;
        while j < order.len() && sl.scores[order[j]] == s {
            if sl.labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    /// Fraction of traces in which the agent asked each feature.
    pub frequency: Vec<f64>,
    /// Mean number of agent-chosen questions.
    pub mean_length: f64,
}

impl TraceStats {
    /// Features ordered by descending selection frequency (ties by index).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.frequency.len()).collect();
        idx.sort_by(|&a, &b| {
            self.frequency[b]
                .total_cmp(&self.frequency[a])
                .then(a.cmp(&b))
        });
        idx
    }
}

pub fn trace_stats(traces: &[EpisodeTrace], d: usize) -> Result<TraceStats> {
    if traces.is_empty() {
        return Err(Error::Data(
            "trace statistics need at least one trace".into(),
        ));
    }
    let mut counts = vec![0usize; d];
    let mut total_len = 0usize;
    for t in traces {
        total_len += t.questions.len();
        for q in &t.questions {
            if q.index >= d {
                return Err(Error::Shape(format!("question index {} >= {d}", q.index)));
            }
            counts[q.index] += 1;
        }
    }
    let n = traces.len() as f64;
    Ok(TraceStats {
        frequency: counts.into_iter().map(|c| c as f64 / n).collect(),
        mean_length: total_len as f64 / n,
    })
}
