use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.67,
            validation_fraction_of_train: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Disjoint row-index sets; each list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits as written to disk, with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub n_rows: usize,
    pub spec: SplitSpec,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn new(n_rows: usize, spec: SplitSpec, splits: &Splits) -> Self {
        Self {
            n_rows,
            spec,
            train: splits.train.clone(),
            validation: splits.validation.clone(),
            test: splits.test.clone(),
        }
    }

    pub fn splits(&self) -> Splits {
        Splits {
            train: self.train.clone(),
            validation: self.validation.clone(),
            test: self.test.clone(),
        }
    }
}

/// Guards `floor(fraction * n)` against products like `0.67 * 300 = 200.99999...`.
fn floor_fraction(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Shuffles `0..n` with `spec.seed`; the first `floor(train_fraction * n)`
/// indices form the train side, of which `floor(validation_fraction * |side|)`
/// become validation.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Splits> {
    if n < 10 {
        return Err(Error::Data(format!(
            "need at least 10 rows to split, got {n}"
        )));
    }
    for (name, f) in [
        ("train_fraction", spec.train_fraction),
        (
            "validation_fraction_of_train",
            spec.validation_fraction_of_train,
        ),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "{name} must be in (0, 1), got {f}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_side = floor_fraction(spec.train_fraction, n);
    let n_val = floor_fraction(spec.validation_fraction_of_train, n_side);
    let mut validation = order[..n_val].to_vec();
    let mut train = order[n_val..n_side].to_vec();
    let mut test = order[n_side..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Splits {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_sizes_for_one_hundred_rows() {
        let s = split(100, &SplitSpec::default()).unwrap();
        assert_eq!(s.test.len(), 33);
        assert_eq!(s.train.len() + s.validation.len(), 67);
        assert_eq!(s.validation.len(), 13);
        assert_eq!(s.train.len(), 54);
    }

    #[test]
    fn same_seed_same_split() {
        let spec = SplitSpec::with_seed(11);
        assert_eq!(split(100, &spec).unwrap(), split(100, &spec).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let base = split(100, &SplitSpec::with_seed(0)).unwrap();
        for seed in 1..=10 {
            assert_ne!(split(100, &SplitSpec::with_seed(seed)).unwrap(), base);
        }
    }

    #[test]
    fn rejects_tiny_tables_and_bad_fractions() {
        assert!(split(9, &SplitSpec::default()).is_err());
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(split(100, &spec).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_rows(n in 10usize..400, seed in any::<u64>()) {
            let s = split(n, &SplitSpec::with_seed(seed)).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
