// SPDX-License-Identifier: Apache-2.0

//! Non-private censored Weibull maximum likelihood.
//!
//! Setting the partial derivatives of the log-likelihood to zero gives
//!
//! ```text
//! f(p) = sum_i t_i^p ln t_i / sum_i t_i^p
//! g(p) = 1/p + sum_i d_i ln t_i / sum_i d_i
//! f(p) = g(p),          lambda^p = sum_i t_i^p / sum_i d_i
//! ```
//!
//! `f - g` is strictly increasing in `p` (the derivative of `f` is a weighted
//! variance, `g` falls like `1/p`), so the shape equation has at most one root.

use crate::data::{SurvivalDataset, WeibullParams, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::root::newton_bisect;

/// Both sides of the shape equation, bound to one dataset.
#[derive(Debug, Clone, Copy)]
pub struct ScoreFunctions<'a> {
    data: &'a SurvivalDataset,
    max_log_time: f64,
    event_log_mean: f64,
}

impl<'a> ScoreFunctions<'a> {
    pub fn new(data: &'a SurvivalDataset) -> Result<Self> {
        if data.event_count() == 0 {
            return Err(Error::AllCensored);
        }
        let event_log_sum = compensated_sum(
            data.log_times()
                .iter()
                .zip(data.events())
                .filter(|(_, d)| **d)
                .map(|(l, _)| *l),
        );
        let max_log_time = data.log_times().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            data,
            max_log_time,
            event_log_mean: event_log_sum / data.event_count() as f64,
        })
    }

    /// `f(p)`: the `t^p`-weighted mean of `ln t`.
    pub fn lhs(&self, p: f64) -> f64 {
        // Weights are shifted by the largest ln t; the ratio is unchanged.
        let mut num = CompensatedSum::new();
        let mut den = CompensatedSum::new();
        for &l in self.data.log_times() {
            let w = (p * (l - self.max_log_time)).exp();
            num.add(w * l);
            den.add(w);
        }
        num.value() / den.value()
    }

    /// `g(p)`.
    pub fn rhs(&self, p: f64) -> f64 {
        p.recip() + self.event_log_mean
    }

    /// `f(p) - g(p)`.
    pub fn gap(&self, p: f64) -> f64 {
        self.lhs(p) - self.rhs(p)
    }
}

/// Settings for the shape root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolverConfig {
    pub abs_tol: f64,
    pub max_newton_iters: usize,
    /// Search interval `(lower, upper]` for the shape.
    pub bracket: (f64, f64),
}

impl Default for RootSolverConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_newton_iters: 100,
            bracket: (1e-8, DEFAULT_GAMMA),
        }
    }
}

impl RootSolverConfig {
    /// Default settings with the upper end of the bracket at `gamma`.
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            bracket: (1e-8, gamma),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(self.abs_tol > 0.0 && lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad solver config: tol {} bracket ({lo}, {hi}]",
                self.abs_tol
            )));
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `sum_i { d_i (ln p + (p-1) ln t_i - p ln lambda) - (t_i/lambda)^p }`.
pub fn log_likelihood(d: &SurvivalDataset, params: &WeibullParams) -> Result<f64> {
    check_positive("shape", params.shape)?;
    check_positive("scale", params.scale)?;
    let (p, ln_p, ln_lambda) = (params.shape, params.shape.ln(), params.scale.ln());
    let mut acc = CompensatedSum::new();
    for (&l, &event) in d.log_times().iter().zip(d.events()) {
        if event {
            acc.add(ln_p + (p - 1.0) * l - p * ln_lambda);
        }
        acc.add(-(p * (l - ln_lambda)).exp());
    }
    let value = acc.value();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("log-likelihood at {params:?}")))
    }
}

/// `f(p) - g(p)`; zero exactly at the maximum likelihood shape.
pub fn score_gap(d: &SurvivalDataset, p: f64) -> Result<f64> {
    check_positive("shape", p)?;
    Ok(ScoreFunctions::new(d)?.gap(p))
}

/// Maximum likelihood shape: safeguarded Newton from `p = 1` with bisection
/// fallback on `cfg.bracket`.
pub fn solve_shape(d: &SurvivalDataset, cfg: &RootSolverConfig) -> Result<f64> {
    cfg.validate()?;
    let score = ScoreFunctions::new(d)?;
    let (lo, hi) = cfg.bracket;
    newton_bisect(
        |p| score.gap(p),
        lo,
        hi,
        1.0,
        |p| cfg.abs_tol * (1.0 + score.lhs(p).abs()),
        cfg.max_newton_iters,
    )
}

/// `lambda = (sum_i t_i^p / sum_i d_i)^(1/p)`.
pub fn solve_scale(d: &SurvivalDataset, p: f64) -> Result<f64> {
    check_positive("shape", p)?;
    if d.event_count() == 0 {
        return Err(Error::AllCensored);
    }
    let power_sum = compensated_sum(d.log_times().iter().map(|l| (p * l).exp()));
    Ok(((power_sum.ln() - (d.event_count() as f64).ln()) / p).exp())
}

/// Shape from the score equation, then scale from the closed form.
pub fn fit_mle(d: &SurvivalDataset, cfg: &RootSolverConfig) -> Result<WeibullParams> {
    let shape = solve_shape(d, cfg)?;
    let scale = solve_scale(d, shape)?;
    Ok(WeibullParams { shape, scale })
}
