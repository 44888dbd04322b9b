// SPDX-License-Identifier: Apache-2.0

//! Comparison mechanisms: global-sensitivity Laplace noise on the MLE, and
//! sample-and-aggregate over disjoint random subsets.
//!
//! Both assume the parameters lie in `[0, gamma]`, which gives each a global
//! sensitivity of `gamma`, and split the total budget evenly between shape and
//! scale. Outputs are returned as released (not projected back into
//! `[0, gamma]`); use [`WeibullParams::clamped`] for that post-processing.

use crate::data::{SurvivalDataset, WeibullParams};
use crate::error::{Error, Result};
use crate::estimator::{fit_mle, RootSolverConfig};
use crate::rng::RandomSource;

fn check_budget(epsilon: f64, gamma: f64) -> Result<()> {
    for (name, v) in [("epsilon", epsilon), ("gamma", gamma)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// MLE plus `Laplace(gamma / (epsilon / 2))` on each parameter.
pub fn laplace_baseline(
    d: &SurvivalDataset,
    epsilon: f64,
    gamma: f64,
    rng: &mut RandomSource,
) -> Result<WeibullParams> {
    check_budget(epsilon, gamma)?;
    let mle = fit_mle(d, &RootSolverConfig::with_gamma(gamma))?;
    Ok(perturb_fit(&mle, epsilon, gamma, rng))
}

/// The noise step of [`laplace_baseline`] for a precomputed fit.
pub fn perturb_fit(fit: &WeibullParams, epsilon: f64, gamma: f64, rng: &mut RandomSource) -> WeibullParams {
    let scale = gamma / (epsilon / 2.0);
    WeibullParams {
        shape: fit.shape + rng.laplace(scale),
        scale: fit.scale + rng.laplace(scale),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaaConfig {
    /// Average records per subset; the partition count is
    /// `max(1, floor(n / target_subset_size))`.
    pub target_subset_size: usize,
    pub gamma: f64,
    /// Total budget for both parameters.
    pub epsilon: f64,
}

impl SaaConfig {
    pub fn new(epsilon: f64, gamma: f64) -> Self {
        Self {
            target_subset_size: 500,
            gamma,
            epsilon,
        }
    }

    pub fn partitions(&self, n: usize) -> usize {
        (n / self.target_subset_size.max(1)).max(1)
    }
}

/// Splits `0..n` (already shuffled) into `m` consecutive chunks of `n / m`
/// records, the remainder going to the last chunk.
fn partition(indices: &[usize], m: usize) -> Vec<&[usize]> {
    let size = indices.len() / m;
    (0..m)
        .map(|j| {
            let start = j * size;
            let end = if j + 1 == m { indices.len() } else { start + size };
            &indices[start..end]
        })
        .collect()
}

/// Per-subset MLE fits (clamped to `[0, gamma]`) of the `m` shuffled subsets.
/// Subsets whose fit fails are skipped.
pub fn subset_fits(d: &SurvivalDataset, cfg: &SaaConfig, rng: &mut RandomSource) -> Vec<WeibullParams> {
    let mut indices: Vec<usize> = (0..d.len()).collect();
    rng.shuffle(&mut indices);
    let solver = RootSolverConfig::with_gamma(cfg.gamma);
    partition(&indices, cfg.partitions(d.len()))
        .into_iter()
        .filter_map(|chunk| d.subset(chunk).ok())
        .filter_map(|subset| fit_mle(&subset, &solver).ok())
        .map(|fit| fit.clamped(cfg.gamma))
        .collect()
}

/// Mean of the successful subset fits plus `Laplace(gamma / (m' epsilon / 2))`
/// per parameter, where `m'` counts the successful subsets.
pub fn saa_release(d: &SurvivalDataset, cfg: &SaaConfig, rng: &mut RandomSource) -> Result<WeibullParams> {
    check_budget(cfg.epsilon, cfg.gamma)?;
    if cfg.target_subset_size == 0 {
        return Err(Error::InvalidParameter("target subset size must be at least 1".into()));
    }
    let fits = subset_fits(d, cfg, rng);
    if fits.is_empty() {
        return Err(Error::AllSubsetsFailed);
    }
    let m = fits.len() as f64;
    let mean_shape = (fits.iter().map(|f| f.shape).sum::<f64>() / m).clamp(0.0, cfg.gamma);
    let mean_scale = (fits.iter().map(|f| f.scale).sum::<f64>() / m).clamp(0.0, cfg.gamma);
    let noise = cfg.gamma / (m * cfg.epsilon / 2.0);
    Ok(WeibullParams {
        shape: mean_shape + rng.laplace(noise),
        scale: mean_scale + rng.laplace(noise),
    })
}
