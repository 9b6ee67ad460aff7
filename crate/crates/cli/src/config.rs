//! Run settings merged from command-line flags, an optional flat TOML file,
//! the `MINDEX_SEED` environment variable and built-in defaults, in that
//! order of precedence.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mindex::sim::{Algorithm, DgpSpec, ErrorFamily};
use mindex::{
    make_kernel, BandwidthRule, GdConfig, InferenceConfig, StopRule, TrimmingSpec, TruncationFloor,
};

use crate::error::{CliError, Result};
use crate::ingest::Schema;

pub const SEED_ENV: &str = "MINDEX_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrimMode {
    None,
    Box,
    Quantile,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::ALL
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown algorithm '{s}' (kbgd_naive|kbgd_fast|kmbgd_naive|kmbgd_fast|known_g)"))
}

/// Every tunable setting. `None` means "not given at this level". File keys
/// are the flag names without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Sample size of simulated designs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of free coefficients.
    #[arg(long)]
    pub p: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed for data generation and subsampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Latent error law of simulated designs.
    #[arg(long)]
    pub error: Option<ErrorFamily>,
    /// Mini-batch size.
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub batch: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Updates before averaging starts.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Number of averaged updates.
    #[arg(long = "follow-T")]
    #[serde(rename = "follow-T")]
    pub follow_t: Option<usize>,
    /// Moving-average stop rule: window length.
    #[arg(long)]
    pub stop_window: Option<usize>,
    /// Moving-average stop rule: distance between the compared windows.
    #[arg(long)]
    pub stop_gap: Option<usize>,
    /// Moving-average stop rule: tolerance.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Update cap when the stop rule is active.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub kernel_order: Option<u32>,
    /// Bandwidth is std(index) * n^exponent.
    #[arg(long, allow_hyphen_values = true)]
    pub bw_exponent: Option<f64>,
    #[arg(long, value_enum)]
    pub trim: Option<TrimMode>,
    /// Box trimming keeps |x| <= 1 - phi in every covariate.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Quantile trimming band.
    #[arg(long)]
    pub trim_lo: Option<f64>,
    #[arg(long)]
    pub trim_hi: Option<f64>,
    /// Absolute truncation floor; default is a fraction of the median density.
    #[arg(long)]
    pub c_f: Option<f64>,
    /// Worker threads for replications and kernel sums.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Benchmark updates per algorithm.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Benchmarked algorithms, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    pub algorithms: Option<Vec<Algorithm>>,

    /// Input CSV for `estimate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub y_column: Option<String>,
    #[arg(long)]
    pub x0_column: Option<String>,
    /// Covariate columns, comma separated; default is all remaining columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub standardize: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub negate_standardize: Option<Vec<String>>,
    /// Confidence level of the reported intervals.
    #[arg(long)]
    pub level: Option<f64>,
    /// Points on the link-curve grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Apply isotonic regression to the link curve.
    #[arg(long)]
    pub monotone: Option<bool>,
}

macro_rules! overlay {
    ($hi:ident, $lo:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Values set here win; gaps are filled from `lower`.
    pub fn overlay(self, lower: RunConfig) -> RunConfig {
        let (hi, lo) = (self, lower);
        overlay!(hi, lo;
            n, p, reps, seed, error, batch, delta, burn_in, follow_t, stop_window, stop_gap, rho, max_iters,
            kernel_order, bw_exponent, trim, phi, trim_lo, trim_hi, c_f, threads, out, iters, algorithms,
            data, y_column, x0_column, covariates, standardize, negate_standardize, level, grid_points, monotone,
        )
    }

    /// Flags over file over the seed environment variable.
    pub fn resolve(flags: RunConfig, file: Option<RunConfig>, seed_env: Option<&str>) -> Result<RunConfig> {
        let mut cfg = flags.overlay(file.unwrap_or_default());
        if cfg.seed.is_none() {
            if let Some(raw) = seed_env {
                let seed = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{raw}'")))?;
                cfg.seed = Some(seed);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("mindex-out"))
    }

    pub fn dgp(&self) -> DgpSpec {
        DgpSpec::new(
            self.n.unwrap_or(5000),
            self.p.unwrap_or(10),
            self.error.unwrap_or(ErrorFamily::Normal),
            self.seed(),
        )
    }

    fn trimming(&self) -> Result<TrimmingSpec<f64>> {
        let t = match self.trim.unwrap_or(TrimMode::None) {
            TrimMode::None => TrimmingSpec::None,
            TrimMode::Box => TrimmingSpec::Box { phi: self.phi.unwrap_or(0.0) },
            TrimMode::Quantile => {
                TrimmingSpec::Quantile { lo: self.trim_lo.unwrap_or(0.01), hi: self.trim_hi.unwrap_or(0.99) }
            }
        };
        t.validate()?;
        Ok(t)
    }

    fn bandwidth(&self) -> BandwidthRule<f64> {
        let mut rule = BandwidthRule::default();
        if let Some(e) = self.bw_exponent {
            rule.exponent = e;
        }
        rule
    }

    pub fn gd_config(&self) -> Result<GdConfig<f64>> {
        let d = GdConfig::<f64>::default();
        let stop = match (self.stop_window, self.stop_gap, self.rho) {
            (None, None, None) => None,
            (Some(w), Some(g), Some(r)) => Some(StopRule::new(w, g, r)?),
            _ => {
                return Err(CliError::Usage("the stop rule needs all of --stop-window, --stop-gap and --rho".into()))
            }
        };
        let cfg = GdConfig {
            delta: self.delta.unwrap_or(d.delta),
            trimming: self.trimming()?,
            floor: self.c_f.map_or(d.floor, TruncationFloor::Fixed),
            batch_size: self.batch.unwrap_or(d.batch_size),
            kernel: make_kernel(self.kernel_order.unwrap_or(6))?,
            bw_rule: self.bandwidth(),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            follow_t: self.follow_t.unwrap_or(d.follow_t),
            stop,
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            seed: self.seed(),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inference_config(&self) -> Result<InferenceConfig<f64>> {
        Ok(InferenceConfig {
            kernel: make_kernel(self.kernel_order.unwrap_or(6))?,
            bw_rule: self.bandwidth(),
            trimming: self.trimming()?,
            ..InferenceConfig::default()
        })
    }

    pub fn schema(&self) -> Result<Schema> {
        let need = |v: &Option<String>, flag: &str| {
            v.clone().ok_or_else(|| CliError::Usage(format!("estimate needs --{flag}")))
        };
        Ok(Schema {
            y_column: need(&self.y_column, "y-column")?,
            x0_column: need(&self.x0_column, "x0-column")?,
            covariate_columns: self.covariates.clone().unwrap_or_default(),
            standardize: self.standardize.clone().unwrap_or_default(),
            negate_standardize: self.negate_standardize.clone().unwrap_or_default(),
        })
    }
}
