// SPDX-License-Identifier: Apache-2.0

//! Seedable randomness shared by the generator, the mechanisms and the
//! baselines.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// A deterministic stream of random variates. Identical seeds produce
/// identical sequences on every platform.
///
/// Every primitive draw bumps a counter so callers can audit how much
/// randomness a mechanism consumed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha20Rng,
    draws: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Number of primitive draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(Open01)
    }

    /// Uniform on the open interval (lower, upper).
    pub fn uniform_in(&mut self, lower: f64, upper: f64) -> f64 {
        lower + (upper - lower) * self.uniform()
    }

    /// Zero-mean Laplace variate with density `exp(-|x|/scale) / (2 scale)`,
    /// drawn by inverting the CDF.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        let u = self.uniform() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    /// Index drawn with probability proportional to `weights[i]`. Returns
    /// `None` when the weights do not sum to a positive finite number.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return None;
        }
        let target = self.uniform() * total;
        let mut cumulative = 0.0;
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                cumulative += w;
                last_positive = Some(i);
                if target < cumulative {
                    return Some(i);
                }
            }
        }
        // Rounding can leave `target` a hair above the running total.
        last_positive
    }

    /// Fisher–Yates shuffle; one draw per swap position.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            self.draws += 1;
            let j = self.rng.random_range(0..=i);
            items.swap(i, j);
        }
    }
}

/// Derives a 64-bit stream seed from a master seed and a list of labels.
///
/// The result depends only on the inputs, never on execution order, so
/// concurrent trials can each build their own [`RandomSource`].
pub fn derive_seed(master: u64, labels: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
