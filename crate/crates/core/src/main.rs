// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpweibull::baselines::{laplace_baseline, saa_release, SaaConfig};
use dpweibull::data::{generate_raw, load_csv, normalize, MechanismConfig, WeibullParams};
use dpweibull::estimator::{fit_mle, log_likelihood, RootSolverConfig};
use dpweibull::harness::{emit_report, run_benchmark, BenchmarkSpec};
use dpweibull::ladder::compute_lsis;
use dpweibull::mechanisms::release_params;
use dpweibull::rng::RandomSource;
use dpweibull::Error;

#[derive(Parser)]
#[command(name = "dpweibull", version, about = "Differentially private Weibull estimation for censored survival data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Name of the time column
    #[arg(long, default_value = "time")]
    time: String,
    /// Name of the event column (1 = observed, 0 = censored)
    #[arg(long, default_value = "event")]
    event: String,
    #[arg(long, default_value_t = dpweibull::data::DEFAULT_OMEGA)]
    omega: f64,
    #[arg(long, default_value_t = dpweibull::data::DEFAULT_GAMMA)]
    gamma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    LspTll,
    Laplace,
    Saa,
}

#[derive(Subcommand)]
enum Command {
    /// Non-private maximum likelihood fit
    Fit {
        #[command(flatten)]
        input: Input,
    },
    /// Private release of shape and scale
    Release {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "lsp-tll")]
        mechanism: MechanismArg,
        /// Total privacy budget for both parameters
        #[arg(long)]
        epsilon: f64,
        #[arg(long, env = "DPWEIBULL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = dpweibull::data::DEFAULT_RUNGS)]
        rungs: usize,
    },
    /// Print the nested interval ladder around the fitted shape
    Ladder {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = dpweibull::data::DEFAULT_RUNGS)]
        rungs: usize,
    },
    /// Write a synthetic censored Weibull dataset
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        shape: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.0)]
        censor_fraction: f64,
        #[arg(long, env = "DPWEIBULL_SEED", default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an MdAE benchmark described by a TOML file
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> dpweibull::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Fit { input } => {
            let d = normalize(&load_csv(&input.input, &input.time, &input.event)?, input.omega)?;
            let fit = fit_mle(&d, &RootSolverConfig::with_gamma(input.gamma))?;
            let ll = log_likelihood(&d, &fit)?;
            writeln!(out, "shape,scale,log_likelihood")?;
            writeln!(out, "{},{},{}", fit.shape, fit.scale, ll)?;
        }
        Command::Release {
            input,
            mechanism,
            epsilon,
            seed,
            rungs,
        } => {
            let d = normalize(&load_csv(&input.input, &input.time, &input.event)?, input.omega)?;
            let mut rng = RandomSource::new(seed);
            let released = match mechanism {
                MechanismArg::LspTll => {
                    let cfg = MechanismConfig::new(epsilon)?
                        .with_rungs(rungs)
                        .with_gamma(input.gamma)
                        .with_omega(input.omega)
                        .with_seed(seed);
                    release_params(&d, &cfg, &mut rng)?
                }
                MechanismArg::Laplace => laplace_baseline(&d, epsilon, input.gamma, &mut rng)?,
                MechanismArg::Saa => saa_release(&d, &SaaConfig::new(epsilon, input.gamma), &mut rng)?,
            };
            writeln!(out, "shape,scale")?;
            writeln!(out, "{},{}", released.shape, released.scale)?;
        }
        Command::Ladder { input, rungs } => {
            let d = normalize(&load_csv(&input.input, &input.time, &input.event)?, input.omega)?;
            let cfg = MechanismConfig::new(1.0)?
                .with_rungs(rungs)
                .with_gamma(input.gamma)
                .with_omega(input.omega);
            let ladder = compute_lsis(&d, &cfg, &RootSolverConfig::with_gamma(input.gamma))?;
            ladder.write_csv(&mut out)?;
        }
        Command::Synth {
            n,
            shape,
            scale,
            censor_fraction,
            seed,
            output,
        } => {
            let raw = generate_raw(n, WeibullParams::new(shape, scale)?, censor_fraction, seed)?;
            match output {
                Some(path) => raw.write_csv(std::fs::File::create(path)?, "time", "event")?,
                None => raw.write_csv(&mut out, "time", "event")?,
            }
        }
        Command::Bench { config, out: dir } => {
            let spec = BenchmarkSpec::from_file(&config)?;
            let report = run_benchmark(&spec)?;
            for f in &report.failures {
                eprintln!(
                    "warning: {} {}: {}",
                    f.dataset,
                    f.mechanism.map_or("", |m| m.name()),
                    f.message
                );
            }
            for path in emit_report(&report, &dir)? {
                writeln!(out, "{}", path.display())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
