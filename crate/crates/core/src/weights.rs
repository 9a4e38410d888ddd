use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::template::WeightKey;

/// Shared trainable parameters, indexed by [`WeightKey`], with a frozen flag
/// per key. Optimizers never modify frozen entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    values: Vec<f64>,
    frozen: Vec<bool>,
}

/// Range of the uniform initial weight distribution.
pub const INIT_RANGE: f64 = 0.5;

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let frozen = vec![false; values.len()];
        WeightStore { values, frozen }
    }

    /// `n` weights drawn uniformly from [-0.5, 0.5].
    pub fn uniform(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_values((0..n).map(|_| init_draw(&mut rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, value: f64) -> WeightKey {
        self.values.push(value);
        self.frozen.push(false);
        WeightKey(self.values.len() - 1)
    }

    pub fn get(&self, key: WeightKey) -> f64 {
        self.values[key.0]
    }

    pub fn set(&mut self, key: WeightKey, value: f64) {
        self.values[key.0] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_frozen(&self, key: WeightKey) -> bool {
        self.frozen[key.0]
    }

    pub fn set_frozen(&mut self, key: WeightKey, frozen: bool) {
        self.frozen[key.0] = frozen;
    }

    pub fn unfreeze_all(&mut self) {
        self.frozen.iter_mut().for_each(|f| *f = false);
    }

    pub fn frozen_keys(&self) -> Vec<WeightKey> {
        (0..self.len()).filter(|&i| self.frozen[i]).map(WeightKey).collect()
    }

    /// Applies `w -= rate * grad` to every key not frozen and enabled in `mask`.
    pub fn step(&mut self, grad: &[f64], rate: f64, mask: &[bool]) {
        for (i, g) in grad.iter().enumerate() {
            if mask[i] && !self.frozen[i] {
                self.values[i] -= rate * g;
            }
        }
    }
}

pub(crate) fn init_draw(rng: &mut impl Rng) -> f64 {
    rng.random_range(-INIT_RANGE..=INIT_RANGE)
}
