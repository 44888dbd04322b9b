// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("missing column `{column}` in header (row 0)")]
    MissingColumn { column: String },

    /// A malformed data record. `row` counts data records from 1, `line` is
    /// the physical line in the file (the header is line 1).
    #[error("row {row} (line {line}): {message}")]
    InvalidRecord {
        row: usize,
        line: u64,
        message: String,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("every record is censored; the likelihood equations are undefined")]
    AllCensored,

    #[error(
        "no root on [{lower}, {upper}]: gap {gap_lower} at lower end, {gap_upper} at upper end"
    )]
    NoRoot {
        lower: f64,
        upper: f64,
        gap_lower: f64,
        gap_upper: f64,
    },

    #[error("root solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("bound family pole at distance {k}: {which} is undefined")]
    BoundPole { k: usize, which: &'static str },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("value {value} outside [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("no subset produced a maximum likelihood fit")]
    AllSubsetsFailed,

    #[error("config: {0}")]
    Config(String),

    #[error("report line {line}: {message}")]
    Report { line: u64, message: String },
}
