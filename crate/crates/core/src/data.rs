// SPDX-License-Identifier: Apache-2.0

//! Domain types, CSV ingestion, normalization and synthetic censored Weibull
//! data.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::root::bisect;
use crate::rng::RandomSource;

pub const DEFAULT_OMEGA: f64 = 6.0;
pub const DEFAULT_GAMMA: f64 = 10.0;
pub const DEFAULT_RUNGS: usize = 500;

/// Survival records as read from a file: positive times in their original
/// units plus event indicators (`true` = event observed, `false` = censored).
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    times: Vec<f64>,
    events: Vec<bool>,
}

impl RawDataset {
    pub fn new(times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} event indicators",
                times.len(),
                events.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !t.is_finite()) {
            return Err(Error::NonFinite(format!("time {t} at record {}", i + 1)));
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| **t <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time {t} at record {} is not positive",
                i + 1
            )));
        }
        Ok(Self { times, events })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|d| **d).count()
    }

    /// Writes a two-column CSV with the given header names.
    pub fn write_csv<W: Write>(&self, writer: W, time_column: &str, event_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record([time_column, event_column]).map_err(csv_err)?;
        for (t, d) in self.times.iter().zip(&self.events) {
            w.write_record([t.to_string(), u8::from(*d).to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses survival records from CSV text. The header row is required, extra
/// columns are ignored, and rows are returned in file order without
/// normalization.
pub fn parse_csv<R: Read>(reader: R, time_column: &str, event_column: &str) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let time_idx = column(time_column)?;
    let event_idx = column(event_column)?;

    let mut times = Vec::new();
    let mut events = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let invalid = |message: String| Error::InvalidRecord { row, line, message };

        let time_text = record
            .get(time_idx)
            .ok_or_else(|| invalid(format!("missing `{time_column}` field")))?;
        let time: f64 = time_text
            .trim()
            .parse()
            .map_err(|_| invalid(format!("time `{time_text}` is not a number")))?;
        if !time.is_finite() || time <= 0.0 {
            return Err(invalid(format!("time {time_text} is not a positive real")));
        }

        let event = match record.get(event_idx) {
            Some("1") => true,
            Some("0") => false,
            Some(other) => return Err(invalid(format!("event must be 0 or 1, got `{other}`"))),
            None => return Err(invalid(format!("missing `{event_column}` field"))),
        };
        times.push(time);
        events.push(event);
    }
    RawDataset::new(times, events)
}

pub fn load_csv(path: impl AsRef<Path>, time_column: &str, event_column: &str) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, time_column, event_column)
}

/// Right-censored observations normalized into `[exp(-omega), 1]`.
///
/// `ln t` is cached per record since every estimator evaluates `t^p` as
/// `exp(p ln t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    log_times: Vec<f64>,
    events: Vec<bool>,
    event_count: usize,
    omega: f64,
    source_min: f64,
    source_max: f64,
}

impl SurvivalDataset {
    /// Wraps already-normalized records, checking every time lies in
    /// `[exp(-omega), 1]`.
    pub fn new(times: Vec<f64>, events: Vec<bool>, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let raw = RawDataset::new(times, events)?;
        let floor = (-omega).exp();
        if let Some(&t) = raw.times.iter().find(|t| **t < floor || **t > 1.0) {
            return Err(Error::OutOfRange {
                value: t,
                lower: floor,
                upper: 1.0,
            });
        }
        let (lo, hi) = extrema(&raw.times);
        Ok(Self::from_parts(raw.times, raw.events, omega, lo, hi))
    }

    fn from_parts(times: Vec<f64>, events: Vec<bool>, omega: f64, source_min: f64, source_max: f64) -> Self {
        let log_times = times.iter().map(|t| t.ln()).collect();
        let event_count = events.iter().filter(|d| **d).count();
        Self {
            times,
            log_times,
            events,
            event_count,
            omega,
            source_min,
            source_max,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_times(&self) -> &[f64] {
        &self.log_times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of uncensored records.
    pub fn event_count(&self) -> usize {
        self.event_count
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// The records at `indices`, keeping the parent's normalization.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let times: Vec<f64> = indices.iter().map(|&i| self.times[i]).collect();
        let events = indices.iter().map(|&i| self.events[i]).collect();
        Self::new(times, events, self.omega)
    }

    /// An adjacent dataset: record `index` replaced by `(time, event)`.
    pub fn with_record(&self, index: usize, time: f64, event: bool) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "record index {index} out of range for {} records",
                self.len()
            )));
        }
        let mut times = self.times.clone();
        let mut events = self.events.clone();
        times[index] = time;
        events[index] = event;
        Self::new(times, events, self.omega)
    }

    /// The normalized records viewed as raw input.
    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            times: self.times.clone(),
            events: self.events.clone(),
        }
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")))
    }
}

fn extrema(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Divides every time by the dataset maximum, then clamps from below at
/// `exp(-omega)`. The longest observation maps to exactly 1.
pub fn normalize(raw: &RawDataset, omega: f64) -> Result<SurvivalDataset> {
    check_omega(omega)?;
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (lo, hi) = extrema(&raw.times);
    let floor = (-omega).exp();
    let times = raw.times.iter().map(|t| (t / hi).max(floor)).collect();
    Ok(SurvivalDataset::from_parts(times, raw.events.clone(), omega, lo, hi))
}

/// Weibull shape `p` and scale `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        for (name, v) in [("shape", shape), ("scale", scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { shape, scale })
    }

    /// `1 - exp(-(t/lambda)^p)` for `t >= 0`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            -(-(t / self.scale).powf(self.shape)).exp_m1()
        }
    }

    /// Inverse of [`cdf`](Self::cdf) for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        self.scale * (-(-u).ln_1p()).powf(self.shape.recip())
    }

    /// Both parameters projected onto `[0, gamma]`.
    pub fn clamped(&self, gamma: f64) -> Self {
        Self {
            shape: self.shape.clamp(0.0, gamma),
            scale: self.scale.clamp(0.0, gamma),
        }
    }
}

/// Hyper-parameters of one private release.
///
/// `epsilon` is the total budget spent on publishing both parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub epsilon: f64,
    pub rungs: usize,
    pub gamma: f64,
    pub omega: f64,
    pub seed: u64,
}

impl MechanismConfig {
    /// A config with the default ladder settings (`K = 500`, `gamma = 10`,
    /// `omega = 6`) and seed 0.
    pub fn new(epsilon: f64) -> Result<Self> {
        Self {
            epsilon,
            rungs: DEFAULT_RUNGS,
            gamma: DEFAULT_GAMMA,
            omega: DEFAULT_OMEGA,
            seed: 0,
        }
        .validated()
    }

    pub fn with_rungs(mut self, rungs: usize) -> Self {
        self.rungs = rungs;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validated(self) -> Result<Self> {
        for (name, v) in [("epsilon", self.epsilon), ("gamma", self.gamma), ("omega", self.omega)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(self)
    }
}

/// Sufficient statistics of a dataset plus the extrema of the original
/// (pre-normalization) times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSummary {
    pub n: usize,
    pub uncensored: usize,
    pub sum_log_t_events: f64,
    pub t_min: f64,
    pub t_max: f64,
}

pub fn summarize(d: &SurvivalDataset) -> DatasetSummary {
    let sum_log_t_events = compensated_sum(
        d.log_times
            .iter()
            .zip(&d.events)
            .filter(|(_, e)| **e)
            .map(|(l, _)| *l),
    );
    DatasetSummary {
        n: d.len(),
        uncensored: d.event_count(),
        sum_log_t_events,
        t_min: d.source_min,
        t_max: d.source_max,
    }
}

/// Probability that a `Weibull(shape, 1)` event time falls below an
/// independent `Uniform(0, x)` censoring time, i.e. `1 - (1/x) * int_0^x
/// exp(-s^shape) ds`.
fn uniform_censoring_event_rate(shape: f64, x: f64) -> f64 {
    // With s = x * v^q the integrand is smooth at 0 once q * shape >= 2.
    let q = (2.0 / shape).max(1.0);
    let a = x.powf(shape);
    let h = |v: f64| if v == 0.0 { if q == 1.0 { 1.0 } else { 0.0 } } else { q * v.powf(q - 1.0) * (-a * v.powf(q * shape)).exp() };
    const INTERVALS: usize = 2048;
    let step = 1.0 / INTERVALS as f64;
    let mut acc = h(0.0) + h(1.0);
    for i in 1..INTERVALS {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * h(i as f64 * step);
    }
    1.0 - acc * step / 3.0
}

/// Upper end `c` of a `Uniform(0, c)` censoring distribution giving the
/// requested expected censored fraction.
pub fn uniform_censoring_bound(params: WeibullParams, censor_fraction: f64) -> Result<f64> {
    if !(censor_fraction > 0.0 && censor_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "censor fraction must lie in (0, 1), got {censor_fraction}"
        )));
    }
    let target = 1.0 - censor_fraction;
    let gap = |log_x: f64| uniform_censoring_event_rate(params.shape, log_x.exp()) - target;
    let (mut lo, mut hi) = (-30.0, 30.0);
    while gap(lo) > 0.0 {
        lo *= 2.0;
    }
    while gap(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoConvergence { iterations: 0 });
        }
    }
    let bracket = bisect(gap, lo, hi, 1e-12)?;
    Ok(params.scale * bracket.midpoint().exp())
}

/// Draws `n` Weibull event times by inverse CDF and censors them with
/// independent `Uniform(0, c)` censoring times, `c` chosen so the expected
/// censored fraction is `censor_fraction`. A record keeps the smaller of its
/// two times. With `censor_fraction = 0` no censoring time is drawn.
pub fn generate_raw(n: usize, true_params: WeibullParams, censor_fraction: f64, seed: u64) -> Result<RawDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..1.0).contains(&censor_fraction) {
        return Err(Error::InvalidParameter(format!(
            "censor fraction must lie in [0, 1), got {censor_fraction}"
        )));
    }
    let params = WeibullParams::new(true_params.shape, true_params.scale)?;
    let bound = if censor_fraction > 0.0 {
        Some(uniform_censoring_bound(params, censor_fraction)?)
    } else {
        None
    };
    let mut rng = RandomSource::new(seed);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let event_time = params.quantile(rng.uniform()).max(f64::MIN_POSITIVE);
        match bound {
            Some(c) => {
                let censor_time = (c * rng.uniform()).max(f64::MIN_POSITIVE);
                times.push(event_time.min(censor_time));
                events.push(event_time <= censor_time);
            }
            None => {
                times.push(event_time);
                events.push(true);
            }
        }
    }
    RawDataset::new(times, events)
}

/// [`generate_raw`] followed by [`normalize`].
pub fn generate_synthetic(
    n: usize,
    true_params: WeibullParams,
    censor_fraction: f64,
    omega: f64,
    seed: u64,
) -> Result<SurvivalDataset> {
    normalize(&generate_raw(n, true_params, censor_fraction, seed)?, omega)
}
