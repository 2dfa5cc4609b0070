//! Tabular samples, splits, scaling and exploration weights.

mod csv_table;
mod mnist;
mod split;
pub mod synthetic;

pub use csv_table::load_csv;
pub use mnist::{
    load_mnist, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use split::{split, SplitManifest, SplitSpec, Splits};

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-feature `(min, max)` of the raw training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn identity(d: usize) -> Self {
        Self {
            min: vec![0.0; d],
            max: vec![1.0; d],
        }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Raw value clamped to the training range.
    pub fn clamp_raw(&self, j: usize, raw: f64) -> f64 {
        raw.clamp(self.min[j], self.max[j].max(self.min[j]))
    }

    /// Min-max scaling into `[0, 1]`; constant features map to 0.
    pub fn normalize(&self, j: usize, raw: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi > lo {
            ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, j: usize, value: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi > lo {
            lo + value * (hi - lo)
        } else {
            lo
        }
    }
}

/// Samples (`n x d`), integer labels and feature metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    x: Array2<f64>,
    y: Vec<usize>,
    feature_names: Vec<String>,
    forced_indices: Vec<usize>,
    norm_stats: Option<NormStats>,
    n_classes: usize,
}

impl FeatureTable {
    pub fn new(
        x: Array2<f64>,
        y: Vec<usize>,
        feature_names: Vec<String>,
        forced_indices: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 {
            return Err(Error::Data("table has no rows".into()));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
        }
        if feature_names.len() != d {
            return Err(Error::Shape(format!(
                "{d} columns but {} feature names",
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate feature name {name:?}")));
            }
        }
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {v} at row {}, column {}",
                i / d.max(1),
                i % d.max(1)
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        if let Some((row, &label)) = y.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                n_classes,
            });
        }
        let mut forced_indices = forced_indices;
        forced_indices.sort_unstable();
        forced_indices.dedup();
        if let Some(&bad) = forced_indices.iter().find(|&&i| i >= d) {
            return Err(Error::Data(format!(
                "forced index {bad} out of range for {d} features"
            )));
        }
        Ok(Self {
            x,
            y,
            feature_names,
            forced_indices,
            norm_stats: None,
            n_classes,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn label(&self, i: usize) -> usize {
        self.y[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn forced_indices(&self) -> &[usize] {
        &self.forced_indices
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn with_forced_indices(mut self, forced: Vec<usize>) -> Result<Self> {
        let d = self.n_features();
        if let Some(&bad) = forced.iter().find(|&&i| i >= d) {
            return Err(Error::Data(format!(
                "forced index {bad} out of range for {d} features"
            )));
        }
        self.forced_indices = forced;
        self.forced_indices.sort_unstable();
        self.forced_indices.dedup();
        Ok(self)
    }

    /// Row indices grouped by class.
    pub fn class_indices(&self, rows: &[usize]) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes];
        for &i in rows {
            by_class[self.y[i]].push(i);
        }
        by_class
    }

    /// Min-max scales every column with statistics taken from `train_rows`.
    /// Values outside the training range are clamped; constant columns become 0.
    /// Scaling an already scaled table composes with the stored statistics.
    pub fn normalize(&self, train_rows: &[usize]) -> Result<Self> {
        if train_rows.is_empty() {
            return Err(Error::Data(
                "cannot normalize with an empty train split".into(),
            ));
        }
        let d = self.n_features();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for &i in train_rows {
            for (j, &v) in self.x.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let stats = NormStats { min, max };
        let mut out = self.apply_norm_stats_unchecked(&stats);
        out.norm_stats = Some(match &self.norm_stats {
            Some(prev) => NormStats {
                min: (0..d).map(|j| prev.denormalize(j, stats.min[j])).collect(),
                max: (0..d).map(|j| prev.denormalize(j, stats.max[j])).collect(),
            },
            None => stats,
        });
        Ok(out)
    }

    /// Scales a raw table with externally supplied statistics (e.g. from a
    /// trained model).
    pub fn apply_norm_stats(&self, stats: &NormStats) -> Result<Self> {
        if self.norm_stats.is_some() {
            return Err(Error::ContractViolation(
                "table is already normalized".into(),
            ));
        }
        if stats.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "statistics cover {} features, table has {}",
                stats.len(),
                self.n_features()
            )));
        }
        let mut out = self.apply_norm_stats_unchecked(stats);
        out.norm_stats = Some(stats.clone());
        Ok(out)
    }

    fn apply_norm_stats_unchecked(&self, stats: &NormStats) -> Self {
        let mut x = self.x.clone();
        for mut row in x.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = stats.normalize(j, *v);
            }
        }
        Self { x, ..self.clone() }
    }

    /// Raw (display) value of feature `j` given its scaled value.
    pub fn raw_value(&self, j: usize, value: f64) -> f64 {
        match &self.norm_stats {
            Some(s) => s.denormalize(j, value),
            None => value,
        }
    }
}

/// Sampling weights over the `d + 1` actions used for random exploration.
/// Entries `0..d` are features, entry `d` is the guess action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationWeights {
    pub weights: Vec<f64>,
}

impl ExplorationWeights {
    pub fn uniform(n_actions: usize) -> Self {
        Self {
            weights: vec![1.0 / n_actions as f64; n_actions],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() || a.len() != b.len() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Unnormalized per-feature weights `|corr(x_j, y)|` over `train_rows`. With
/// more than two classes the maximum one-vs-rest correlation is used.
pub fn feature_label_correlations(table: &FeatureTable, train_rows: &[usize]) -> Vec<f64> {
    let d = table.n_features();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| train_rows.iter().map(|&i| table.x[[i, j]]).collect())
        .collect();
    let targets: Vec<Vec<f64>> = if table.n_classes == 2 {
        vec![train_rows.iter().map(|&i| table.y[i] as f64).collect()]
    } else {
        (0..table.n_classes)
            .map(|c| {
                train_rows
                    .iter()
                    .map(|&i| if table.y[i] == c { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    columns
        .iter()
        .map(|col| {
            targets
                .iter()
                .map(|t| pearson(col, t).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Correlation-proportional exploration weights. The guess action gets the
/// mean feature weight; an all-zero vector falls back to uniform.
pub fn exploration_weights(table: &FeatureTable, train_rows: &[usize]) -> ExplorationWeights {
    let d = table.n_features();
    let mut w = feature_label_correlations(table, train_rows);
    let mean = w.iter().sum::<f64>() / d as f64;
    w.push(mean);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return ExplorationWeights::uniform(d + 1);
    }
    w.iter_mut().for_each(|v| *v /= total);
    ExplorationWeights { weights: w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn table(x: Array2<f64>, y: Vec<usize>) -> FeatureTable {
        let d = x.ncols();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        FeatureTable::new(x, y, names, vec![], 2).unwrap()
    }

    #[test]
    fn normalize_scales_with_train_range() {
        let t = table(array![[2.0], [4.0], [6.0], [8.0]], vec![0, 1, 0, 1]);
        let n = t.normalize(&[0, 1, 2]).unwrap();
        assert_eq!(n.x().column(0).to_vec(), vec![0.0, 0.5, 1.0, 1.0]);
        let stats = n.norm_stats().unwrap();
        assert_eq!((stats.min[0], stats.max[0]), (2.0, 6.0));
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let t = table(array![[3.0], [3.0], [3.0]], vec![0, 1, 0]);
        let n = t.normalize(&[0, 1, 2]).unwrap();
        assert!(n.x().iter().all(|&v| v == 0.0));
        assert_eq!(n.raw_value(0, 0.0), 3.0);
    }

    #[test]
    fn normalize_is_idempotent_and_keeps_raw_stats() {
        let t = table(
            array![[2.0, -1.0], [4.0, 5.0], [6.0, 0.0], [9.0, 2.0]],
            vec![0, 1, 0, 1],
        );
        let once = t.normalize(&[0, 1, 2]).unwrap();
        let twice = once.normalize(&[0, 1, 2]).unwrap();
        assert_eq!(once.x(), twice.x());
        assert_eq!(once.norm_stats(), twice.norm_stats());
    }

    #[test]
    fn empty_train_split_is_rejected() {
        let t = table(array![[1.0], [2.0]], vec![0, 1]);
        assert!(t.normalize(&[]).is_err());
    }

    #[test]
    fn rejects_non_finite_and_duplicate_names() {
        let x = array![[1.0, f64::NAN]];
        let err = FeatureTable::new(x, vec![0], vec!["a".into(), "b".into()], vec![], 2);
        assert!(matches!(err, Err(Error::Data(_))));
        let x = array![[1.0, 2.0]];
        let err = FeatureTable::new(x, vec![0], vec!["a".into(), "a".into()], vec![], 2);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn identical_feature_has_unit_correlation() {
        let y = vec![0, 1, 1, 0, 1];
        let x = Array2::from_shape_fn((5, 1), |(i, _)| y[i] as f64);
        let t = table(x, y);
        let c = feature_label_correlations(&t, &[0, 1, 2, 3, 4]);
        assert!((c[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_and_orthogonal_features_get_zero_weight() {
        // Column 0 constant; column 1 = [0,0,1,1] against y = [0,1,0,1].
        let x = array![[5.0, 0.0], [5.0, 0.0], [5.0, 1.0], [5.0, 1.0]];
        let t = table(x, vec![0, 1, 0, 1]);
        let w = exploration_weights(&t, &[0, 1, 2, 3]);
        // Both features are uninformative, so the weights fall back to uniform.
        assert_eq!(w.weights, vec![1.0 / 3.0; 3]);
        let c = feature_label_correlations(&t, &[0, 1, 2, 3]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn guess_weight_is_mean_of_features() {
        let x = array![[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.5]];
        let t = table(x, vec![0, 1, 0, 1]);
        let rows = [0, 1, 2, 3];
        let raw = feature_label_correlations(&t, &rows);
        let w = exploration_weights(&t, &rows);
        let total = raw.iter().sum::<f64>() * 1.5;
        assert!((w.weights[2] - raw.iter().sum::<f64>() / 2.0 / total).abs() < 1e-12);
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiclass_uses_max_one_vs_rest() {
        let x = array![[0.0], [0.0], [1.0], [1.0], [0.0], [0.0]];
        let y = vec![0, 1, 2, 2, 0, 1];
        let t = FeatureTable::new(x, y, vec!["a".into()], vec![], 3).unwrap();
        let c = feature_label_correlations(&t, &[0, 1, 2, 3, 4, 5]);
        assert!((c[0] - 1.0).abs() < 1e-12);
    }
}
