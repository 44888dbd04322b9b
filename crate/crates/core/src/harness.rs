// SPDX-License-Identifier: Apache-2.0

//! MdAE benchmark: runs each mechanism many times per dataset and budget and
//! reports the median absolute error against the non-private fit.
//!
//! Budgets in a [`BenchmarkSpec`] are per parameter; a full release of both
//! parameters spends twice that.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::{perturb_fit, saa_release, SaaConfig};
use crate::data::{
    generate_synthetic, load_csv, normalize, MechanismConfig, SurvivalDataset, WeibullParams,
    DEFAULT_GAMMA, DEFAULT_OMEGA, DEFAULT_RUNGS,
};
use crate::error::{Error, Result};
use crate::estimator::{fit_mle, RootSolverConfig};
use crate::ladder::compute_lsis;
use crate::mechanisms::{tll_release, LspMechanism};
use crate::numeric::median;
use crate::rng::{derive_seed, RandomSource};

pub const REPORT_FILE: &str = "mdae.csv";
pub const PLOT_FILE: &str = "plot_mdae.gp";
pub const ERRORS_FILE: &str = "errors.csv";
pub const REPORT_HEADER: [&str; 8] = [
    "dataset",
    "mechanism",
    "epsilon_per_param",
    "parameter",
    "mdae",
    "trials",
    "exact_value",
    "master_seed",
];

/// Median of `|x_i - exact|`.
pub fn mdae(answers: &[f64], exact: f64) -> Result<f64> {
    if answers.is_empty() {
        return Err(Error::InvalidParameter("mdae of an empty answer list".into()));
    }
    if !exact.is_finite() {
        return Err(Error::NonFinite(format!("exact value {exact}")));
    }
    let errors: Vec<f64> = answers.iter().map(|x| (x - exact).abs()).collect();
    median(&errors).ok_or_else(|| Error::NonFinite("NaN among answers".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "lsp_tll", alias = "lsp-tll")]
    LspTll,
    #[serde(rename = "laplace")]
    Laplace,
    #[serde(rename = "saa")]
    Saa,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::LspTll, Mechanism::Laplace, Mechanism::Saa];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::LspTll => "lsp_tll",
            Mechanism::Laplace => "laplace",
            Mechanism::Saa => "saa",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "lsp_tll" | "lsp-tll" => Some(Mechanism::LspTll),
            "laplace" => Some(Mechanism::Laplace),
            "saa" => Some(Mechanism::Saa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    Shape,
    Scale,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Shape => "p",
            Parameter::Scale => "lambda",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "p" => Some(Parameter::Shape),
            "lambda" => Some(Parameter::Scale),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        time_column: String,
        event_column: String,
    },
    Synthetic {
        n: usize,
        shape: f64,
        scale: f64,
        censor_fraction: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

fn default_mechanisms() -> Vec<Mechanism> {
    Mechanism::ALL.to_vec()
}
fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
}
fn default_trials() -> usize {
    500
}
fn default_rungs() -> usize {
    DEFAULT_RUNGS
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_omega() -> f64 {
    DEFAULT_OMEGA
}
fn default_subset_size() -> usize {
    500
}

/// One benchmark run. Deserializes from a flat TOML document with a
/// `[[datasets]]` array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    /// Per-parameter budgets.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_rungs")]
    pub rungs: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_subset_size")]
    pub saa_subset_size: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl BenchmarkSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a config file; relative CSV paths resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for ds in &mut spec.datasets {
            if let DatasetSource::Csv { path, .. } = &mut ds.source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("epsilon {e} is not positive"));
        }
        for (name, v) in [("gamma", self.gamma), ("omega", self.omega)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.saa_subset_size == 0 {
            return bad("saa_subset_size must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub epsilon_per_param: f64,
    pub parameter: Parameter,
    pub mdae: f64,
    pub trials: usize,
    pub exact_value: f64,
    pub master_seed: u64,
}

/// A dataset (or dataset/mechanism cell) that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub dataset: String,
    pub mechanism: Option<Mechanism>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<Failure>,
}

fn load_dataset(spec: &DatasetSpec, omega: f64) -> Result<SurvivalDataset> {
    match &spec.source {
        DatasetSource::Csv {
            path,
            time_column,
            event_column,
        } => normalize(&load_csv(path, time_column, event_column)?, omega),
        DatasetSource::Synthetic {
            n,
            shape,
            scale,
            censor_fraction,
            seed,
        } => generate_synthetic(*n, WeibullParams::new(*shape, *scale)?, *censor_fraction, omega, *seed),
    }
}

fn trial_seed(master: u64, dataset: &str, mechanism: Mechanism, epsilon: f64, trial: usize) -> u64 {
    derive_seed(
        master,
        &[
            dataset.as_bytes(),
            mechanism.name().as_bytes(),
            &epsilon.to_bits().to_le_bytes(),
            &(trial as u64).to_le_bytes(),
        ],
    )
}

/// Runs every (dataset, mechanism, budget) cell. Dataset or cell failures are
/// recorded in [`BenchmarkReport::failures`] and the run continues.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let solver = RootSolverConfig::with_gamma(spec.gamma);
    let mut report = BenchmarkReport::default();

    for ds in &spec.datasets {
        let fail = |mechanism, e: Error| Failure {
            dataset: ds.name.clone(),
            mechanism,
            message: e.to_string(),
        };
        let prepared = load_dataset(ds, spec.omega).and_then(|d| fit_mle(&d, &solver).map(|fit| (d, fit)));
        let (data, exact) = match prepared {
            Ok(v) => v,
            Err(e) => {
                report.failures.push(fail(None, e));
                continue;
            }
        };

        for &mechanism in &spec.mechanisms {
            let ladder = match mechanism {
                Mechanism::LspTll => {
                    let cfg = MechanismConfig::new(1.0)?
                        .with_rungs(spec.rungs)
                        .with_gamma(spec.gamma)
                        .with_omega(spec.omega);
                    match compute_lsis(&data, &cfg, &solver) {
                        Ok(l) => Some(l),
                        Err(e) => {
                            report.failures.push(fail(Some(mechanism), e));
                            continue;
                        }
                    }
                }
                _ => None,
            };

            for &eps in &spec.epsilons {
                let total = 2.0 * eps;
                let lsp = match &ladder {
                    Some(l) => Some(LspMechanism::new(l.clone(), total)?),
                    None => None,
                };
                let saa = SaaConfig {
                    target_subset_size: spec.saa_subset_size,
                    gamma: spec.gamma,
                    epsilon: total,
                };
                let releases: Result<Vec<WeibullParams>> = (0..spec.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let mut rng = RandomSource::new(trial_seed(spec.master_seed, &ds.name, mechanism, eps, trial));
                        match mechanism {
                            Mechanism::LspTll => {
                                let shape = lsp.as_ref().expect("ladder built above").sample(&mut rng);
                                let scale = tll_release(&data, shape, total, &mut rng)?;
                                Ok(WeibullParams { shape, scale })
                            }
                            Mechanism::Laplace => Ok(perturb_fit(&exact, total, spec.gamma, &mut rng)),
                            Mechanism::Saa => saa_release(&data, &saa, &mut rng),
                        }
                    })
                    .collect();
                let releases = match releases {
                    Ok(r) => r,
                    Err(e) => {
                        report.failures.push(fail(Some(mechanism), e));
                        continue;
                    }
                };
                for (parameter, exact_value, pick) in [
                    (Parameter::Shape, exact.shape, (|r: &WeibullParams| r.shape) as fn(&WeibullParams) -> f64),
                    (Parameter::Scale, exact.scale, |r: &WeibullParams| r.scale),
                ] {
                    let answers: Vec<f64> = releases.iter().map(pick).collect();
                    report.rows.push(ReportRow {
                        dataset: ds.name.clone(),
                        mechanism,
                        epsilon_per_param: eps,
                        parameter,
                        mdae: mdae(&answers, exact_value)?,
                        trials: spec.trials,
                        exact_value,
                        master_seed: spec.master_seed,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Writes the report rows as CSV. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.mechanism.name().to_string(),
            r.epsilon_per_param.to_string(),
            r.parameter.name().to_string(),
            r.mdae.to_string(),
            r.trials.to_string(),
            r.exact_value.to_string(),
            r.master_seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a report written by [`write_report_csv`].
pub fn parse_report<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Report {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(REPORT_HEADER) {
        return Err(Error::Report {
            line: 1,
            message: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Report {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Report { line, message };
        let float = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| err(format!("`{}` is not a number", &record[i])))
        };
        rows.push(ReportRow {
            dataset: record[0].to_string(),
            mechanism: Mechanism::from_name(&record[1])
                .ok_or_else(|| err(format!("unknown mechanism `{}`", &record[1])))?,
            epsilon_per_param: float(2)?,
            parameter: Parameter::from_name(&record[3])
                .ok_or_else(|| err(format!("unknown parameter `{}`", &record[3])))?,
            mdae: float(4)?,
            trials: record[5]
                .parse()
                .map_err(|_| err(format!("`{}` is not a trial count", &record[5])))?,
            exact_value: float(6)?,
            master_seed: record[7]
                .parse()
                .map_err(|_| err(format!("`{}` is not a seed", &record[7])))?,
        });
    }
    Ok(rows)
}

fn gnuplot_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// A gnuplot script drawing MdAE against the per-parameter budget, one panel
/// per (dataset, parameter) and one series per mechanism, log-scaled y.
pub fn plot_script(rows: &[ReportRow]) -> String {
    let mut panels: Vec<(&str, Parameter)> = Vec::new();
    for r in rows {
        if !panels.contains(&(r.dataset.as_str(), r.parameter)) {
            panels.push((r.dataset.as_str(), r.parameter));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# MdAE versus per-parameter privacy budget");
    let mut blocks = Vec::new();
    for (pi, (dataset, parameter)) in panels.iter().enumerate() {
        let mut series = Vec::new();
        for mech in Mechanism::ALL {
            let points: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.dataset == *dataset && r.parameter == *parameter && r.mechanism == mech)
                .collect();
            if points.is_empty() {
                continue;
            }
            let block = format!("$panel{pi}_{}", mech.name());
            let _ = writeln!(out, "{block} << EOD");
            for r in points {
                let _ = writeln!(out, "{} {}", r.epsilon_per_param, r.mdae);
            }
            let _ = writeln!(out, "EOD");
            series.push((block, mech));
        }
        blocks.push(series);
    }
    let cols = panels.len().clamp(1, 2);
    let rows_n = panels.len().div_ceil(cols).max(1);
    let _ = writeln!(out, "set terminal pngcairo size {},{}", 600 * cols, 450 * rows_n);
    let _ = writeln!(out, "set output \"mdae.png\"");
    let _ = writeln!(out, "set logscale xy");
    let _ = writeln!(out, "set xlabel \"privacy budget per parameter\"");
    let _ = writeln!(out, "set ylabel \"MdAE\"");
    let _ = writeln!(out, "set key top right");
    let _ = writeln!(out, "set multiplot layout {rows_n},{cols}");
    for ((dataset, parameter), series) in panels.iter().zip(&blocks) {
        let _ = writeln!(out, "set title {}", gnuplot_string(&format!("{dataset}: {}", parameter.name())));
        let plots: Vec<String> = series
            .iter()
            .map(|(block, mech)| format!("{block} using 1:2 with linespoints title \"{}\"", mech.name()))
            .collect();
        let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    }
    let _ = writeln!(out, "unset multiplot");
    out
}

/// Writes `mdae.csv` and `plot_mdae.gp` into `out_dir`, plus `errors.csv`
/// when the run recorded failures. Returns the paths written.
pub fn emit_report(report: &BenchmarkReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join(REPORT_FILE);
    write_report_csv(&report.rows, fs::File::create(&csv_path)?)?;
    written.push(csv_path);

    let plot_path = dir.join(PLOT_FILE);
    fs::write(&plot_path, plot_script(&report.rows))?;
    written.push(plot_path);

    if !report.failures.is_empty() {
        let path = dir.join(ERRORS_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv(e.to_string()))?;
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["dataset", "mechanism", "message"]).map_err(csv_err)?;
        for f in &report.failures {
            w.write_record([f.dataset.as_str(), f.mechanism.map_or("", Mechanism::name), f.message.as_str()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &o in &order[i..=j] {
                r[o] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// One-sided 5% critical value of Spearman's rho for `n` pairs.
pub fn spearman_critical_5pct(n: usize) -> f64 {
    match n {
        0..=3 => f64::INFINITY,
        4 => 1.0,
        5 => 0.900,
        6 => 0.829,
        7 => 0.714,
        8 => 0.643,
        9 => 0.600,
        10 => 0.564,
        _ => 1.645 / ((n - 1) as f64).sqrt(),
    }
}

/// A (dataset, mechanism, parameter) series whose MdAE rises with the budget
/// significantly at the 5% level.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendViolation {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub parameter: Parameter,
    pub rho: f64,
}

pub fn increasing_trends(rows: &[ReportRow]) -> Vec<TrendViolation> {
    let mut keys: Vec<(&str, Mechanism, Parameter)> = Vec::new();
    for r in rows {
        let key = (r.dataset.as_str(), r.mechanism, r.parameter);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(dataset, mechanism, parameter)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.dataset == dataset && r.mechanism == mechanism && r.parameter == parameter)
                .map(|r| (r.epsilon_per_param, r.mdae))
                .unzip();
            let rho = spearman_rho(&xs, &ys);
            (rho >= spearman_critical_5pct(xs.len())).then(|| TrendViolation {
                dataset: dataset.to_string(),
                mechanism,
                parameter,
                rho,
            })
        })
        .collect()
}
