// SPDX-License-Identifier: Apache-2.0

//! Private release of the Weibull parameters.
//!
//! The shape is drawn by an exponential mechanism whose utility is the
//! ladder-shaped function `U(p, D) = -rung_of(p)`. The utility has
//! sensitivity 1 when the ladder is nested and contains its neighbours'
//! ladders one rung further out, so sampling with density proportional to
//! `exp(-k * epsilon / 4)` on rung `k` spends `epsilon / 2`.
//!
//! The scale is recovered from `sum d` and `sum t^p`, each released with
//! Laplace noise of scale `4 / epsilon` (sensitivity 1, budget `epsilon / 4`).
//!
//! Every function here takes the total budget `epsilon` of a full release.

use crate::data::{MechanismConfig, SurvivalDataset, WeibullParams};
use crate::error::{Error, Result};
use crate::estimator::RootSolverConfig;
use crate::ladder::{compute_lsis, Ladder};
use crate::numeric::compensated_sum;
use crate::rng::RandomSource;

/// Floor applied to the noisy sums before forming their ratio.
pub const NOISY_SUM_FLOOR: f64 = 1e-9;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// Level `i` of the ladder: `[l(i), l(i-1)) ∪ (u(i-1), u(i)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub rung: usize,
    pub left: (f64, f64),
    pub right: (f64, f64),
    pub length: f64,
    /// `ln(length) - rung * epsilon / 4`; `-inf` for an empty level.
    pub log_weight: f64,
}

impl Level {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    fn left_length(&self) -> f64 {
        self.left.1 - self.left.0
    }
}

/// Levels `1..=K+1` with their exponential-mechanism weights, kept in log
/// space (`exp(-i epsilon / 4)` underflows for deep ladders).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    levels: Vec<Level>,
    epsilon: f64,
    log_normalizer: f64,
}

impl LevelWeights {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ln sum_i weight(i)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Probability of each level, in level order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| (l.log_weight - self.log_normalizer).exp())
            .collect()
    }
}

pub fn build_level_weights(ladder: &Ladder, epsilon: f64) -> Result<LevelWeights> {
    check_epsilon(epsilon)?;
    let (lowers, uppers) = (ladder.lowers(), ladder.uppers());
    let levels: Vec<Level> = (1..lowers.len())
        .map(|i| {
            let left = (lowers[i], lowers[i - 1]);
            let right = (uppers[i - 1], uppers[i]);
            let length = (uppers[i] - uppers[i - 1]) + (lowers[i - 1] - lowers[i]);
            Level {
                rung: i,
                left,
                right,
                length,
                log_weight: length.ln() - i as f64 * epsilon / 4.0,
            }
        })
        .collect();
    let max = levels.iter().map(|l| l.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("every ladder level is empty".into()));
    }
    let log_normalizer = max + levels.iter().map(|l| (l.log_weight - max).exp()).sum::<f64>().ln();
    Ok(LevelWeights {
        levels,
        epsilon,
        log_normalizer,
    })
}

/// The shape mechanism for one dataset: its ladder plus level weights.
///
/// The ladder does not depend on `epsilon`, so a benchmark can build it once
/// and re-weight it per budget.
#[derive(Debug, Clone)]
pub struct LspMechanism {
    ladder: Ladder,
    weights: LevelWeights,
}

impl LspMechanism {
    pub fn new(ladder: Ladder, epsilon: f64) -> Result<Self> {
        let weights = build_level_weights(&ladder, epsilon)?;
        Ok(Self { ladder, weights })
    }

    pub fn from_dataset(d: &SurvivalDataset, cfg: &MechanismConfig, solver: &RootSolverConfig) -> Result<Self> {
        Self::new(compute_lsis(d, cfg, solver)?, cfg.epsilon)
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn weights(&self) -> &LevelWeights {
        &self.weights
    }

    /// One level draw, then one uniform position along the level's two
    /// sub-intervals laid end to end.
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        let probabilities = self.weights.probabilities();
        let level = rng
            .categorical(&probabilities)
            .map(|i| self.weights.levels[i])
            .expect("level weights were validated to be positive");
        let offset = rng.uniform() * level.length;
        let p = if offset < level.left_length() {
            level.left.0 + offset
        } else {
            level.right.0 + (offset - level.left_length())
        };
        p.clamp(0.0, self.ladder.gamma())
    }

    /// Output density at `p`.
    pub fn density(&self, p: f64) -> Result<f64> {
        let rung = self.ladder.rung_of(p).ok_or(Error::OutOfRange {
            value: p,
            lower: 0.0,
            upper: self.ladder.gamma(),
        })?;
        Ok((-(rung as f64) * self.weights.epsilon / 4.0 - self.weights.log_normalizer).exp())
    }
}

/// Releases the shape with budget `cfg.epsilon / 2`.
pub fn lsp_release(d: &SurvivalDataset, cfg: &MechanismConfig, rng: &mut RandomSource) -> Result<f64> {
    let solver = RootSolverConfig::with_gamma(cfg.gamma);
    Ok(LspMechanism::from_dataset(d, cfg, &solver)?.sample(rng))
}

/// Analytic output density of [`lsp_release`] at `p` for the given ladder.
pub fn lsp_density(ladder: &Ladder, epsilon: f64, p: f64) -> Result<f64> {
    LspMechanism::new(ladder.clone(), epsilon)?.density(p)
}

/// Noisy `sum d` (`delta`) and `sum t^p` (`tau`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisySums {
    pub delta: f64,
    pub tau: f64,
}

impl NoisySums {
    /// `(tau / delta)^(1/p)` after flooring both sums at
    /// [`NOISY_SUM_FLOOR`]; saturates at `f64::MAX` instead of overflowing.
    pub fn scale(&self, p: f64) -> f64 {
        let delta = self.delta.max(NOISY_SUM_FLOOR);
        let tau = self.tau.max(NOISY_SUM_FLOOR);
        let lambda = ((tau.ln() - delta.ln()) / p).exp();
        lambda.min(f64::MAX)
    }
}

/// Exact `(sum d, sum t^p)`.
pub fn exact_sums(d: &SurvivalDataset, p: f64) -> NoisySums {
    NoisySums {
        delta: d.event_count() as f64,
        tau: compensated_sum(d.log_times().iter().map(|l| (p * l).exp())),
    }
}

/// Both sums with independent `Laplace(4 / epsilon)` noise, `delta` first.
pub fn tll_noisy_sums(d: &SurvivalDataset, p: f64, epsilon: f64, rng: &mut RandomSource) -> Result<NoisySums> {
    check_epsilon(epsilon)?;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidParameter(format!("shape must be positive, got {p}")));
    }
    let exact = exact_sums(d, p);
    let scale = 4.0 / epsilon;
    let delta = exact.delta + rng.laplace(scale);
    let tau = exact.tau + rng.laplace(scale);
    Ok(NoisySums { delta, tau })
}

/// Releases the scale for a given (already released) shape with budget
/// `epsilon / 2`.
pub fn tll_release(d: &SurvivalDataset, p: f64, epsilon: f64, rng: &mut RandomSource) -> Result<f64> {
    Ok(tll_noisy_sums(d, p, epsilon, rng)?.scale(p))
}

/// Full release: shape by the ladder mechanism, then scale from that shape.
pub fn release_params(d: &SurvivalDataset, cfg: &MechanismConfig, rng: &mut RandomSource) -> Result<WeibullParams> {
    let cfg = cfg.validated()?;
    let shape = lsp_release(d, &cfg, rng)?;
    let scale = tll_release(d, shape, cfg.epsilon, rng)?;
    Ok(WeibullParams { shape, scale })
}
