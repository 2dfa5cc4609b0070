use rand::Rng;

use crate::dataset::FeatureTable;
use crate::{Error, Result};

/// Draws training rows, optionally class-balanced: pick a class uniformly,
/// then a row uniformly within it.
#[derive(Debug, Clone)]
pub struct PatientSampler {
    rows: Vec<usize>,
    by_class: Vec<Vec<usize>>,
    oversample: bool,
}

impl PatientSampler {
    pub fn new(table: &FeatureTable, rows: &[usize], oversample: bool) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("no training rows to sample from".into()));
        }
        let by_class = table.class_indices(rows);
        if oversample {
            if let Some(c) = by_class.iter().position(Vec::is_empty) {
                return Err(Error::InvalidConfig(format!(
                    "oversampling needs every class in the train split; class {c} is empty"
                )));
            }
        }
        Ok(Self {
            rows: rows.to_vec(),
            by_class,
            oversample,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.oversample {
            let class = &self.by_class[rng.gen_range(0..self.by_class.len())];
            class[rng.gen_range(0..class.len())]
        } else {
            self.rows[rng.gen_range(0..self.rows.len())]
        }
    }
}
