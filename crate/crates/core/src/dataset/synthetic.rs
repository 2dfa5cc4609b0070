//! Synthetic tables whose label depends on a known subset of features.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureTable;
use crate::Result;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// `y = 1[sum(x[relevant]) + noise > |relevant| / 2]`
    pub relevant: Vec<usize>,
    /// Half-width of the uniform noise added before thresholding.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 20 uniform features, label decided by features 3 and 7.
    pub fn pair_rule(n: usize, seed: u64) -> Self {
        Self {
            n,
            d: 20,
            relevant: vec![3, 7],
            noise: 0.05,
            seed,
        }
    }

    pub fn generate(&self) -> Result<FeatureTable> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let x = Array2::from_shape_fn((self.n, self.d), |_| rng.gen::<f64>());
        let threshold = self.relevant.len() as f64 / 2.0;
        let y = x
            .outer_iter()
            .map(|row| {
                let s: f64 = self.relevant.iter().map(|&j| row[j]).sum();
                let noise = if self.noise > 0.0 {
                    rng.gen_range(-self.noise..self.noise)
                } else {
                    0.0
                };
                usize::from(s + noise > threshold)
            })
            .collect();
        let names = (0..self.d).map(|j| format!("x{j}")).collect();
        FeatureTable::new(x, y, names, vec![], 2)
    }
}
