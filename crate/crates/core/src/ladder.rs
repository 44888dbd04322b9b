// SPDX-License-Identifier: Apache-2.0

//! Local-sensitivity intervals for the shape parameter.
//!
//! For a dataset `D` and distance `k`, the interval `[l(k), u(k)]` contains
//! the shape root of every dataset obtained from `D` by replacing at most `k`
//! records. Its endpoints come from four bounding families that sandwich both
//! sides of the score equation over all such neighbours:
//!
//! ```text
//! f_L^k(p) = (sum t^p ln t - k/(e p)) / (sum of the n-k smallest t^p)
//! f_U^k(p) = (sum t^p ln t + k/(e p)) / (sum t^p + k)
//! g_L^k(p) = 1/p + (sum d ln t - k omega) / (sum d - k)
//! g_U^k(p) = 1/p + (sum d ln t + k omega) / (sum d + k)
//! ```
//!
//! `l(k)` is where `f_U^k - g_L^k` first turns non-negative and `u(k)` where
//! `f_L^k - g_U^k` last is non-positive: no neighbour can have a root outside.

use std::f64::consts::E;
use std::io::Write;

use rayon::prelude::*;

use crate::data::{MechanismConfig, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimator::{solve_shape, RootSolverConfig};
use crate::numeric::{compensated_sum, log_grid, CompensatedSum};
use crate::root::bisect;

/// Probe points used to bracket each rung equation.
const PROBE_POINTS: usize = 64;
/// Relative width at which rung bisection stops.
const RUNG_TOLERANCE: f64 = 1e-13;

/// Minimum of `t^p ln t` over `t` in (0, 1], attained at `t = exp(-1/p)`.
pub fn min_tp_log_t(p: f64) -> f64 {
    -1.0 / (E * p)
}

/// The four bounds at one `(k, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub f_lower: f64,
    pub f_upper: f64,
    pub g_lower: f64,
    pub g_upper: f64,
}

/// `t^p`-sums at one `p`. `prefix[j]` is the sum of the `j` smallest `t^p`.
#[derive(Debug, Clone)]
struct PowerSums {
    weighted_log: f64,
    total: f64,
    prefix: Vec<f64>,
}

/// Bounding families bound to a dataset and the time floor `exp(-omega)`.
#[derive(Debug, Clone)]
pub struct BoundFamilies<'a> {
    data: &'a SurvivalDataset,
    omega: f64,
    sorted_log_times: Vec<f64>,
    event_log_sum: f64,
}

impl<'a> BoundFamilies<'a> {
    /// Uses the dataset's own `omega`.
    pub fn new(data: &'a SurvivalDataset) -> Self {
        Self::with_omega(data, data.omega())
    }

    /// `omega` must not be smaller than the one the data was normalized with,
    /// otherwise `ln t >= -omega` fails and the bounds are unsound.
    pub fn with_omega(data: &'a SurvivalDataset, omega: f64) -> Self {
        let mut sorted_log_times = data.log_times().to_vec();
        sorted_log_times.sort_by(f64::total_cmp);
        let event_log_sum = compensated_sum(
            data.log_times()
                .iter()
                .zip(data.events())
                .filter(|(_, d)| **d)
                .map(|(l, _)| *l),
        );
        Self {
            data,
            omega,
            sorted_log_times,
            event_log_sum,
        }
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn events(&self) -> usize {
        self.data.event_count()
    }

    /// Sums for a single `k`, without materializing the prefix table.
    fn sums_for(&self, p: f64, k: usize) -> (f64, f64, f64) {
        let keep = self.n().saturating_sub(k);
        let mut weighted_log = CompensatedSum::new();
        let mut total = CompensatedSum::new();
        let mut truncated = 0.0;
        for (j, &l) in self.sorted_log_times.iter().enumerate() {
            if j == keep {
                truncated = total.value();
            }
            let w = (p * l).exp();
            weighted_log.add(w * l);
            total.add(w);
        }
        if keep == self.n() {
            truncated = total.value();
        }
        (weighted_log.value(), total.value(), truncated)
    }

    fn power_sums(&self, p: f64) -> PowerSums {
        let mut weighted_log = CompensatedSum::new();
        let mut total = CompensatedSum::new();
        let mut prefix = Vec::with_capacity(self.n() + 1);
        prefix.push(0.0);
        for &l in &self.sorted_log_times {
            let w = (p * l).exp();
            weighted_log.add(w * l);
            total.add(w);
            prefix.push(total.value());
        }
        PowerSums {
            weighted_log: weighted_log.value(),
            total: total.value(),
            prefix,
        }
    }

    fn f_lower_from(&self, k: usize, p: f64, weighted_log: f64, truncated: f64) -> Option<f64> {
        (k < self.n()).then(|| (weighted_log + k as f64 * min_tp_log_t(p)) / truncated)
    }

    fn f_upper_from(&self, k: usize, p: f64, weighted_log: f64, total: f64) -> f64 {
        (weighted_log - k as f64 * min_tp_log_t(p)) / (total + k as f64)
    }

    /// `f_L^k(p)`; `None` once `k >= n` (the truncated denominator vanishes).
    pub fn f_lower(&self, k: usize, p: f64) -> Option<f64> {
        let (wl, _, truncated) = self.sums_for(p, k);
        self.f_lower_from(k, p, wl, truncated)
    }

    pub fn f_upper(&self, k: usize, p: f64) -> f64 {
        let (wl, total, _) = self.sums_for(p, k);
        self.f_upper_from(k, p, wl, total)
    }

    /// `g_L^k(p)`; `None` once `k >= sum d` (pole of the denominator).
    pub fn g_lower(&self, k: usize, p: f64) -> Option<f64> {
        (k < self.events()).then(|| {
            p.recip() + (self.event_log_sum - k as f64 * self.omega) / (self.events() - k) as f64
        })
    }

    pub fn g_upper(&self, k: usize, p: f64) -> f64 {
        p.recip() + (self.event_log_sum + k as f64 * self.omega) / (self.events() + k) as f64
    }

    /// All four bounds, or [`Error::BoundPole`] when a lower bound is undefined
    /// at this distance.
    pub fn eval(&self, k: usize, p: f64) -> Result<Bounds> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("shape must be positive, got {p}")));
        }
        let (wl, total, truncated) = self.sums_for(p, k);
        let g_lower = self.g_lower(k, p).ok_or(Error::BoundPole { k, which: "g_L" })?;
        let f_lower = self
            .f_lower_from(k, p, wl, truncated)
            .ok_or(Error::BoundPole { k, which: "f_L" })?;
        Ok(Bounds {
            f_lower,
            f_upper: self.f_upper_from(k, p, wl, total),
            g_lower,
            g_upper: self.g_upper(k, p),
        })
    }

    /// `f_U^k - g_L^k` at `p`; increasing in `p`.
    fn lower_gap(&self, k: usize, p: f64) -> f64 {
        let (wl, total, _) = self.sums_for(p, k);
        self.f_upper_from(k, p, wl, total) - self.g_lower(k, p).unwrap_or(f64::NEG_INFINITY)
    }

    /// `f_L^k - g_U^k` at `p`.
    fn upper_gap(&self, k: usize, p: f64) -> f64 {
        let (wl, _, truncated) = self.sums_for(p, k);
        self.f_lower_from(k, p, wl, truncated).unwrap_or(f64::NEG_INFINITY) - self.g_upper(k, p)
    }
}

/// Nested local-sensitivity intervals `[l(k), u(k)]` for `k = 0..=K+1`.
///
/// Rung 0 is the point `{p(D)}`; rung `K+1` is the floor `[0, gamma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    lowers: Vec<f64>,
    uppers: Vec<f64>,
    gamma: f64,
}

impl Ladder {
    /// Builds a ladder from explicit endpoints, checking the rung-0 point,
    /// the floor rung, nesting, and containment in `[0, gamma]`.
    pub fn from_bounds(lowers: Vec<f64>, uppers: Vec<f64>, gamma: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("ladder: {msg}")));
        if lowers.len() != uppers.len() || lowers.len() < 2 {
            return bad(format!("{} lowers, {} uppers", lowers.len(), uppers.len()));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return bad(format!("gamma {gamma}"));
        }
        let last = lowers.len() - 1;
        if lowers[0] != uppers[0] {
            return bad("rung 0 must be a single point".into());
        }
        if lowers[last] != 0.0 || uppers[last] != gamma {
            return bad("last rung must be [0, gamma]".into());
        }
        for k in 0..=last {
            if !(0.0 <= lowers[k] && lowers[k] <= uppers[k] && uppers[k] <= gamma) {
                return bad(format!("rung {k} = [{}, {}] outside [0, {gamma}]", lowers[k], uppers[k]));
            }
            if k > 0 && (lowers[k] > lowers[k - 1] || uppers[k] < uppers[k - 1]) {
                return bad(format!("rung {k} does not contain rung {}", k - 1));
            }
        }
        Ok(Self { lowers, uppers, gamma })
    }

    /// Number of computed rungs `K` (the floor rung is `K + 1`).
    pub fn rungs(&self) -> usize {
        self.lowers.len() - 2
    }

    pub fn lowers(&self) -> &[f64] {
        &self.lowers
    }

    pub fn uppers(&self) -> &[f64] {
        &self.uppers
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The shape root on the dataset the ladder was built from.
    pub fn root(&self) -> f64 {
        self.lowers[0]
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.lowers[k], self.uppers[k])
    }

    /// Smallest `k` with `p` in `[l(k), u(k)]`, or `None` outside `[0, gamma]`.
    pub fn rung_of(&self, p: f64) -> Option<usize> {
        if !(0.0..=self.gamma).contains(&p) {
            return None;
        }
        // Rungs are nested, so membership is monotone in k.
        let (mut lo, mut hi) = (0, self.lowers.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.lowers[mid] <= p && p <= self.uppers[mid] {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }

    /// Ladder-shaped utility `U(p, D) = -rung_of(p)`.
    pub fn utility(&self, p: f64) -> Option<i64> {
        self.rung_of(p).map(|k| -(k as i64))
    }

    /// Diagnostic staircase as `k,lower,upper` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["k", "lower", "upper"]).map_err(csv_err)?;
        for (k, (l, u)) in self.lowers.iter().zip(&self.uppers).enumerate() {
            w.write_record([k.to_string(), l.to_string(), u.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes the ladder of local-sensitivity intervals for `d`.
///
/// Rung equations are bracketed on a log-spaced probe grid over
/// `(solver.bracket.0, gamma]` and refined by bisection, keeping the side of
/// the final bracket that widens the interval. A rung whose lower equation
/// hits the `g_L` pole (`k >= sum d`) gets `l = 0`; one whose upper equation
/// stays non-positive up to `gamma` gets `u = gamma`. Endpoints are then
/// clamped into `[0, gamma]` and nesting is enforced.
pub fn compute_lsis(d: &SurvivalDataset, cfg: &MechanismConfig, solver: &RootSolverConfig) -> Result<Ladder> {
    let cfg = cfg.validated()?;
    let floor = (-cfg.omega).exp();
    if let Some(&t) = d.times().iter().find(|t| **t < floor) {
        return Err(Error::OutOfRange {
            value: t,
            lower: floor,
            upper: 1.0,
        });
    }
    let solver = RootSolverConfig {
        bracket: (solver.bracket.0, cfg.gamma),
        ..*solver
    };
    let root = solve_shape(d, &solver)?;

    let families = BoundFamilies::with_omega(d, cfg.omega);
    let grid = log_grid(solver.bracket.0, cfg.gamma, PROBE_POINTS);
    let grid_sums: Vec<PowerSums> = grid.par_iter().map(|&p| families.power_sums(p)).collect();

    let rungs: Vec<(f64, f64)> = (1..=cfg.rungs)
        .into_par_iter()
        .map(|k| {
            (
                rung_lower(&families, k, &grid, &grid_sums),
                rung_upper(&families, k, &grid, &grid_sums, cfg.gamma),
            )
        })
        .collect();

    let mut lowers = Vec::with_capacity(cfg.rungs + 2);
    let mut uppers = Vec::with_capacity(cfg.rungs + 2);
    lowers.push(root);
    uppers.push(root);
    for (l, u) in rungs {
        let l = l.clamp(0.0, cfg.gamma).min(*lowers.last().unwrap());
        let u = u.clamp(0.0, cfg.gamma).max(*uppers.last().unwrap());
        lowers.push(l);
        uppers.push(u);
    }
    lowers.push(0.0);
    uppers.push(cfg.gamma);
    Ladder::from_bounds(lowers, uppers, cfg.gamma)
}

fn rung_lower(families: &BoundFamilies, k: usize, grid: &[f64], sums: &[PowerSums]) -> f64 {
    if k >= families.events() {
        return 0.0;
    }
    let gap_at = |j: usize| {
        let s = &sums[j];
        families.f_upper_from(k, grid[j], s.weighted_log, s.total)
            - families.g_lower(k, grid[j]).unwrap_or(f64::NEG_INFINITY)
    };
    match (0..grid.len()).find(|&j| gap_at(j) >= 0.0) {
        Some(j) if j > 0 => bisect(|p| families.lower_gap(k, p), grid[j - 1], grid[j], RUNG_TOLERANCE)
            .map_or(0.0, |b| b.lower),
        // Root below the probe range, or (impossible when rung 0 exists) no
        // root at all: fall back to the floor.
        _ => 0.0,
    }
}

fn rung_upper(families: &BoundFamilies, k: usize, grid: &[f64], sums: &[PowerSums], gamma: f64) -> f64 {
    if k >= families.n() {
        return gamma;
    }
    let gap_at = |j: usize| {
        let s = &sums[j];
        let truncated = s.prefix[families.n() - k];
        families
            .f_lower_from(k, grid[j], s.weighted_log, truncated)
            .unwrap_or(f64::NEG_INFINITY)
            - families.g_upper(k, grid[j])
    };
    let last = grid.len() - 1;
    if gap_at(last) <= 0.0 {
        return gamma;
    }
    match (0..last).rev().find(|&j| gap_at(j) <= 0.0) {
        Some(j) => bisect(|p| families.upper_gap(k, p), grid[j], grid[j + 1], RUNG_TOLERANCE)
            .map_or(gamma, |b| b.upper),
        None => gamma,
    }
}
