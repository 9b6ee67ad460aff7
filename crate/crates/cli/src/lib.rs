//! Command-line front end: configuration merging, CSV ingestion and the
//! `kernel-check`, `simulate`, `bench` and `estimate` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, TrimMode, SEED_ENV};
pub use error::{CliError, ErrorReport, Result};
pub use ingest::{ingest_csv, ingest_reader, Ingested, Schema, TransformSummary};

#[derive(Debug, Parser)]
#[command(name = "mindex", version, about = "Kernel gradient estimation of monotone index models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact moment report of a kernel, printed as JSON.
    KernelCheck {
        #[arg(long, default_value_t = 6)]
        order: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Monte Carlo study on a simulated design.
    Simulate(WithConfig),
    /// Per-update timing and error traces.
    Bench(WithConfig),
    /// Estimate coefficients, standard errors and the link from a CSV file.
    Estimate(WithConfig),
}

#[derive(Debug, clap::Args)]
pub struct WithConfig {
    /// Flat TOML file with `key = value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

impl WithConfig {
    pub fn resolve(self) -> Result<RunConfig> {
        let file = self.config.as_deref().map(RunConfig::load).transpose()?;
        RunConfig::resolve(self.run, file, std::env::var(SEED_ENV).ok().as_deref())
    }
}

/// Runs a parsed command. Returns the text for standard output; the
/// optional directory is where a failure report should also be written.
pub fn run(cli: Cli) -> std::result::Result<String, (CliError, Option<PathBuf>)> {
    match cli.command {
        Command::KernelCheck { order, tol } => {
            let report = commands::kernel_check(order, tol).map_err(|e| (e, None))?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if report.pass {
                Ok(text)
            } else {
                println!("{text}");
                Err((CliError::Core(mindex::Error::DegenerateData(format!("order-{order} kernel fails its moment checks"))), None))
            }
        }
        Command::Simulate(w) => {
            let cfg = w.resolve().map_err(|e| (e, None))?;
            let out = cfg.out_dir();
            let r = commands::simulate(&cfg).map_err(|e| (e, Some(out)))?;
            eprintln!(
                "{} replications in {:.1}s (median {:.2}s each)",
                r.results.replications, r.results.runtime.total_seconds, r.results.runtime.median_seconds
            );
            Ok(r.results.to_table())
        }
        Command::Bench(w) => {
            let cfg = w.resolve().map_err(|e| (e, None))?;
            if cfg.threads.is_some() {
                eprintln!("warning: --threads is ignored by bench; kernel sums run on one thread for comparable timings");
            }
            let out = cfg.out_dir();
            let rows = commands::bench(&cfg).map_err(|e| (e, Some(out)))?;
            let mut s = format!("{:<12} {:>8} {:>14} {:>10}\n", "algorithm", "updates", "median s/upd", "rmse");
            for r in rows {
                s.push_str(&format!(
                    "{:<12} {:>8} {:>14.3e} {:>10.4}{}\n",
                    r.algorithm.name(),
                    r.updates,
                    r.median_update_seconds.unwrap_or(f64::NAN),
                    r.final_rmse.unwrap_or(f64::NAN),
                    r.diverged.map(|d| format!("  ({d})")).unwrap_or_default()
                ));
            }
            Ok(s)
        }
        Command::Estimate(w) => {
            let cfg = w.resolve().map_err(|e| (e, None))?;
            let out = cfg.out_dir();
            let r = commands::estimate(&cfg).map_err(|e| (e, Some(out)))?;
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
            let mut s = format!("n = {}, p = {}, {} updates\n", r.n, r.p, r.updates);
            s.push_str(&format!("{:<16} {:>10} {:>10} {:>10} {:>10}\n", "coefficient", "estimate", "se", "ci_lo", "ci_hi"));
            for c in &r.coefficients {
                s.push_str(&format!(
                    "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                    c.name, c.estimate, c.se, c.ci_lo, c.ci_hi
                ));
            }
            Ok(s)
        }
    }
}
