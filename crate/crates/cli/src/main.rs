use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use epmotion::C64;
use epmotion_cli::config::{Overrides, RunConfig};
use epmotion_cli::pipeline::{
    multiplicity_histogram, run_crossings, run_pipeline, run_sweep, run_validate, PipelineError, Stage,
};
use epmotion_cli::report::RunSummary;

#[derive(Debug, Parser)]
#[command(name = "epmotion", version, about = "Track exceptional points of complex symmetric families along δ")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect level crossings at the starting δ and group them into multiplets.
    Crossings(Overrides),
    /// Full pipeline: crossings, cluster resolution, propagation, oracle, figures.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Start from the EP located near this λ (e.g. `0+2i`) instead of crossings.
        #[arg(long = "seed-ep", allow_negative_numbers = true)]
        seed_ep: Option<C64>,
        /// Draw λ(δ) with Im λ ≥ 0.
        #[arg(long = "positive-im")]
        positive_imaginary: bool,
    },
    /// Re-check a finished run against the EP oracle and derivative differences.
    Validate {
        /// Run directory; defaults to `EPMOTION_OUT` or `epmotion-out`.
        dir: Option<PathBuf>,
    },
    /// Spectrum of H(λ, δ) for real λ over the scan range at several δ.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated δ values.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1", allow_negative_numbers = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Print the cluster table of a finished run.
    Report {
        /// Run directory; defaults to `EPMOTION_OUT` or `epmotion-out`.
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn default_dir(dir: Option<PathBuf>) -> PathBuf {
    RunConfig::default().resolve_output_dir(dir.as_deref())
}

fn fail(dir: &Path, err: PipelineError) -> anyhow::Error {
    err.write_to(dir);
    anyhow::Error::new(err)
}

fn configure(overrides: &Overrides) -> anyhow::Result<(RunConfig, PathBuf)> {
    let cfg = overrides.resolve().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let dir = cfg.resolve_output_dir(overrides.out.as_deref());
    Ok((cfg, dir))
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Crossings(overrides) => {
            let (cfg, dir) = configure(&overrides)?;
            let multiplets = run_crossings(&cfg, &dir).map_err(|e| fail(&dir, e))?;
            println!("{} at δ = {}: {} multiplets", cfg.model.label(), cfg.delta_start, multiplets.len());
            for m in &multiplets {
                let energies: Vec<String> = m.pairs.iter().map(|p| format!("{:.6}", p.energy)).collect();
                println!("  λ = {:.10}  {}-fold  E = [{}]", m.lambda_in, m.multiplicity(), energies.join(", "));
            }
            println!("{}", multiplicity_histogram(&multiplets));
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { overrides, seed_ep, positive_imaginary } => {
            let (mut cfg, dir) = configure(&overrides)?;
            if seed_ep.is_some() {
                cfg.seed_ep = seed_ep;
            }
            cfg.positive_imaginary |= positive_imaginary;
            let outcome = run_pipeline(&cfg, &dir).map_err(|e| fail(&dir, e))?;
            print!("{}", outcome.summary.render());
            println!("wrote {}", outcome.dir.display());
            if outcome.issues.is_empty() {
                return Ok(ExitCode::SUCCESS);
            }
            for issue in &outcome.issues {
                eprintln!("error: {issue}");
            }
            let first = outcome.issues[0].clone();
            first.with(serde_json::to_value(&outcome.issues)?).write_to(&dir);
            Ok(ExitCode::from(2))
        }
        Command::Validate { dir } => {
            let dir = default_dir(dir);
            let report = run_validate(&dir).map_err(|e| fail(&dir, e))?;
            for e in &report.entries {
                let detail = match (&e.discrepancy, &e.error) {
                    (Some(d), _) => {
                        format!("discrepancy {d:.2e}  self-overlap {:.2e}", e.condition.unwrap_or(f64::NAN))
                    }
                    (None, Some(err)) => err.clone(),
                    (None, None) => String::new(),
                };
                println!(
                    "{}  {:<4} δ = {:<6} ∂H error {:.1e}/{:.1e}  {detail}",
                    if e.passed { "PASS" } else { "FAIL" },
                    e.cluster,
                    e.delta,
                    e.derivatives.d_lambda_error,
                    e.derivatives.d_delta_error
                );
            }
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep { overrides, deltas, points } => {
            let (cfg, dir) = configure(&overrides)?;
            let sweep = run_sweep(&cfg, &dir, &deltas, points).map_err(|e| fail(&dir, e))?;
            println!("{} points × {} levels written to {}", sweep.points.len(), sweep.dim, dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let dir = default_dir(dir);
            let summary = RunSummary::load(&dir).with_context(|| format!("report for {}", dir.display()))?;
            print!("{}", summary.render());
            Ok(ExitCode::SUCCESS)
        }
    }
}
