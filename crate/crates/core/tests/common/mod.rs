// SPDX-License-Identifier: Apache-2.0

//! Independent reference computations shared by the integration tests. These
//! use plain sums and plain bisection so they do not share code paths with
//! the library solvers.
#![allow(dead_code)]

use dpweibull::data::{SurvivalDataset, WeibullParams};
use dpweibull::rng::RandomSource;

/// lhs - rhs of the shape score equation, evaluated directly.
pub fn naive_gap(times: &[f64], events: &[bool], p: f64) -> f64 {
    let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &l in &logs {
        let w = (p * (l - shift)).exp();
        num += w * l;
        den += w;
    }
    let c = events.iter().filter(|&&e| e).count() as f64;
    let s: f64 = logs.iter().zip(events).filter(|(_, &e)| e).map(|(l, _)| l).sum();
    num / den - (1.0 / p + s / c)
}

/// Root of [`naive_gap`] by bisection down to an absolute width of `tol`.
/// None when the gap does not change sign on `[lo, hi]`.
pub fn oracle_root(times: &[f64], events: &[bool], mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let g_lo = naive_gap(times, events, lo);
    let g_hi = naive_gap(times, events, hi);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if naive_gap(times, events, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Per-record mean censored Weibull log-likelihood.
pub fn mean_log_likelihood(times: &[f64], events: &[bool], p: f64, lambda: f64) -> f64 {
    let mut total = 0.0;
    for (&t, &d) in times.iter().zip(events) {
        if d {
            total += p.ln() + (p - 1.0) * t.ln() - p * lambda.ln();
        }
        total -= (t / lambda).powf(p);
    }
    total / times.len() as f64
}

pub fn random_params(rng: &mut RandomSource) -> WeibullParams {
    WeibullParams::new(rng.uniform_in(0.5, 5.0), rng.uniform_in(0.2, 5.0)).unwrap()
}

/// A random normalized time, log-uniform on `[e^-omega, 1]`.
pub fn random_time(rng: &mut RandomSource, omega: f64) -> f64 {
    rng.uniform_in(-omega, 0.0).exp()
}

/// A one-record modification of `d` at a random index.
pub fn random_neighbor(d: &SurvivalDataset, rng: &mut RandomSource) -> SurvivalDataset {
    loop {
        let i = (rng.uniform() * d.len() as f64) as usize % d.len();
        let t = random_time(rng, d.omega());
        let e = rng.uniform() < 0.5;
        if let Ok(n) = d.with_record(i, t, e) {
            if n.event_count() > 0 {
                return n;
            }
        }
    }
}

/// `n` log-uniform times with at least `min_events` observed.
pub fn random_small_dataset(n: usize, min_events: usize, omega: f64, rng: &mut RandomSource) -> SurvivalDataset {
    loop {
        let times: Vec<f64> = (0..n).map(|_| random_time(rng, omega)).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.6).collect();
        if events.iter().filter(|&&e| e).count() >= min_events {
            return SurvivalDataset::new(times, events, omega).unwrap();
        }
    }
}
