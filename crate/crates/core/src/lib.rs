// SPDX-License-Identifier: Apache-2.0

//! Differentially private Weibull survival analysis.
//!
//! The shape parameter is released by an exponential mechanism over a ladder
//! of local-sensitivity intervals ([`mechanisms::lsp_release`]); the scale by
//! adding Laplace noise to the two sums that determine it
//! ([`mechanisms::tll_release`]). [`baselines`] holds the global-sensitivity
//! Laplace and sample-and-aggregate comparisons, [`harness`] the MdAE
//! benchmark.

pub mod baselines;
pub mod data;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod ladder;
pub mod mechanisms;
pub mod numeric;
pub mod rng;
pub mod root;

pub use data::{
    generate_raw, generate_synthetic, load_csv, normalize, parse_csv, summarize, DatasetSummary,
    MechanismConfig, RawDataset, SurvivalDataset, WeibullParams,
};
pub use error::{Error, Result};
pub use estimator::{fit_mle, log_likelihood, score_gap, solve_scale, solve_shape, RootSolverConfig};
pub use ladder::{compute_lsis, Ladder};
pub use mechanisms::{lsp_release, release_params, tll_release};
pub use rng::RandomSource;
