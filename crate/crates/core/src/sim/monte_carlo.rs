use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{generate_dataset, DgpSpec};
use crate::error::{Error, Result};
use crate::gd::{logit_init, run_akmbgd, GdConfig, RunOptions};
use crate::inference::{covariance, CovarianceEstimate, InferenceConfig};
use crate::linalg::Matrix;

/// Critical value used for the coverage rate.
pub const COVERAGE_Z: f64 = 1.96;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replication `r`; independent of the total replication count.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    splitmix64(base ^ splitmix64(r as u64))
}

/// What one replication contributes to the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub beta: Vec<f64>,
    /// Standard errors; `None` when variance estimation failed.
    pub se: Option<Vec<f64>>,
    /// Relative Frobenius residual of `Lambda Sigma_beta Lambda' = Sigma_xi`.
    pub identity_residual: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuntimeStats {
    pub total_seconds: f64,
    pub mean_seconds: f64,
    pub median_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub replications: usize,
    pub succeeded: usize,
    pub failures: usize,
    pub partial: bool,
    pub failure_messages: Vec<String>,
    pub beta_star: Vec<f64>,
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    /// `None` when no replication produced usable (positive) standard errors.
    pub coverage: Vec<Option<f64>>,
    pub mean_se: Vec<Option<f64>>,
    pub empirical_sd: Vec<f64>,
    pub inference_failures: usize,
    pub max_identity_residual: Option<f64>,
    #[serde(skip)]
    pub estimates: Vec<Vec<f64>>,
    #[serde(skip)]
    pub runtime: RuntimeStats,
}

impl McReport {
    /// Aligned text table: one row per coefficient.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>9} {:>9} {:>9} {:>8} {:>9} {:>9}",
            "coef", "beta*", "Bias", "RMSE", "CR", "mean se", "emp sd"
        );
        let opt = |v: Option<f64>, w: usize, prec: usize| match v {
            Some(v) => format!("{v:>w$.prec$}"),
            None => format!("{:>w$}", "-"),
        };
        for j in 0..self.beta_star.len() {
            let _ = writeln!(
                s,
                "{:>6} {:>9.4} {:>9.4} {:>9.4} {} {} {:>9.4}",
                format!("b{}", j + 1),
                self.beta_star[j],
                self.bias[j],
                self.rmse[j],
                opt(self.coverage[j], 8, 4),
                opt(self.mean_se[j], 9, 4),
                self.empirical_sd[j],
            );
        }
        let _ = writeln!(s, "R = {} ({} failed){}", self.replications, self.failures, if self.partial { " partial" } else { "" });
        s
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates per-replication outcomes against the truth.
pub fn aggregate(beta_star: &[f64], outcomes: Vec<Result<ReplicationOutcome>>) -> McReport {
    let p = beta_star.len();
    let replications = outcomes.len();
    let mut ok = Vec::new();
    let mut failure_messages = Vec::new();
    for o in outcomes {
        match o {
            Ok(o) => ok.push(o),
            Err(e) => failure_messages.push(e.to_string()),
        }
    }
    let failures = failure_messages.len();
    let nan = || vec![f64::NAN; p];
    let (mut mean_b, mut bias, mut rmse, mut sd) = (nan(), nan(), nan(), nan());
    let mut coverage = vec![None; p];
    let mut mean_se = vec![None; p];
    let with_se: Vec<&ReplicationOutcome> = ok.iter().filter(|o| o.se.is_some()).collect();
    for j in 0..p {
        if ok.is_empty() {
            break;
        }
        let vals: Vec<f64> = ok.iter().map(|o| o.beta[j]).collect();
        let m = mean(&vals);
        mean_b[j] = m;
        bias[j] = (m - beta_star[j]).abs();
        rmse[j] = mean(&vals.iter().map(|v| (v - beta_star[j]).powi(2)).collect::<Vec<_>>()).sqrt();
        sd[j] = if vals.len() > 1 {
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        if !with_se.is_empty() {
            let ses: Vec<f64> = with_se.iter().map(|o| o.se.as_ref().expect("filtered")[j]).collect();
            mean_se[j] = Some(mean(&ses));
            if ses.iter().all(|&s| s > 0.0) {
                let hits = with_se
                    .iter()
                    .zip(&ses)
                    .filter(|(o, &s)| (o.beta[j] - beta_star[j]).abs() <= COVERAGE_Z * s)
                    .count();
                coverage[j] = Some(hits as f64 / with_se.len() as f64);
            }
        }
    }
    let mut secs: Vec<f64> = ok.iter().map(|o| o.seconds).collect();
    secs.sort_by(f64::total_cmp);
    let runtime = if secs.is_empty() {
        RuntimeStats::default()
    } else {
        RuntimeStats {
            total_seconds: secs.iter().sum(),
            mean_seconds: mean(&secs),
            median_seconds: secs[secs.len() / 2],
        }
    };
    McReport {
        replications,
        succeeded: ok.len(),
        failures,
        partial: failures > 0,
        failure_messages,
        beta_star: beta_star.to_vec(),
        mean: mean_b,
        bias,
        rmse,
        coverage,
        mean_se,
        empirical_sd: sd,
        inference_failures: ok.len() - with_se.len(),
        max_identity_residual: ok.iter().filter_map(|o| o.identity_residual).reduce(f64::max),
        estimates: ok.into_iter().map(|o| o.beta).collect(),
        runtime,
    }
}

/// Runs `r` replications of a caller-supplied estimator. Replication `i`
/// receives the design with its data seed replaced by the mixed seed and the
/// replication index. Replications run in parallel; results are aggregated
/// in index order.
pub fn run_monte_carlo_with<F>(dgp: &DgpSpec, r: usize, estimate: F) -> Result<McReport>
where
    F: Fn(&DgpSpec, usize) -> Result<ReplicationOutcome> + Sync,
{
    if r < 1 {
        return Err(Error::Usage("need at least one replication".into()));
    }
    dgp.validate()?;
    let outcomes: Vec<Result<ReplicationOutcome>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let spec = DgpSpec { seed: replication_seed(dgp.seed, i), ..dgp.clone() };
            estimate(&spec, i)
        })
        .collect();
    Ok(aggregate(&dgp.beta_star, outcomes))
}

/// Relative Frobenius residual of the sandwich identity.
pub fn identity_residual(c: &CovarianceEstimate<f64>) -> f64 {
    let back: Matrix<f64> = c.lambda_hat.matmul(&c.sigma_beta_hat).matmul(&c.lambda_hat.transpose());
    let diff: f64 = back.data.iter().zip(&c.sigma_xi_hat.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / c.sigma_xi_hat.frobenius()
}

/// One full replication: generate, initialize, estimate, estimate variance.
pub fn replicate(spec: &DgpSpec, gd: &GdConfig<f64>, inf: &InferenceConfig<f64>) -> Result<ReplicationOutcome> {
    let t = Instant::now();
    let (data, _) = generate_dataset::<f64>(spec)?;
    let start = logit_init(&data)?;
    let est = run_akmbgd(&data, gd, &RunOptions { start: Some(start), ..RunOptions::default() })?;
    let (se, identity) = match covariance(&data, &est.beta_bar, inf) {
        Ok(c) => (Some(c.se.clone()), Some(identity_residual(&c))),
        Err(e) if e.is_numerical() => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ReplicationOutcome { beta: est.beta_bar.beta, se, identity_residual: identity, seconds: t.elapsed().as_secs_f64() })
}

/// Averaged-KMBGD Monte Carlo with plug-in standard errors. The subsample
/// seed of each replication is mixed from `gd.seed` and the index.
pub fn run_monte_carlo(dgp: &DgpSpec, gd: &GdConfig<f64>, inf: &InferenceConfig<f64>, r: usize) -> Result<McReport> {
    gd.validate()?;
    gd.validate_batch(dgp.n)?;
    run_monte_carlo_with(dgp, r, |spec, i| {
        let cfg = GdConfig { seed: replication_seed(gd.seed, i), ..gd.clone() };
        replicate(spec, &cfg, inf)
    })
}
