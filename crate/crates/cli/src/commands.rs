use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use mindex::sim::{run_bench, run_monte_carlo, write_traces_csv, Algorithm, BenchOptions, DgpSpec, McReport};
use mindex::{
    confidence_intervals, covariance, estimate_cdf_curve, make_kernel, run_akmbgd, verify_moments, GridSpec,
    MomentReport, RunOptions, StopRule,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, TransformSummary};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn kernel_check(order: u32, tol: f64) -> Result<MomentReport> {
    let k = make_kernel::<f64>(order)?;
    Ok(verify_moments(&k, tol)?)
}

/// Estimation settings echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct EngineSettings {
    pub batch_size: usize,
    pub delta: f64,
    pub burn_in: usize,
    pub follow_t: usize,
    pub stop: Option<StopRule<f64>>,
    pub kernel_order: u32,
    pub bw_exponent: f64,
    pub seed: u64,
}

impl EngineSettings {
    fn of(cfg: &mindex::GdConfig<f64>) -> Self {
        Self {
            batch_size: cfg.batch_size,
            delta: cfg.delta,
            burn_in: cfg.burn_in,
            follow_t: cfg.follow_t,
            stop: cfg.stop,
            kernel_order: cfg.kernel.order(),
            bw_exponent: cfg.bw_rule.exponent,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub design: DgpSpec,
    pub engine: EngineSettings,
    pub results: McReport,
}

/// Monte Carlo run. Writes `report.json` and `estimates.csv`.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let dgp = cfg.dgp();
    let gd = cfg.gd_config()?;
    let inf = cfg.inference_config()?;
    let reps = cfg.reps.unwrap_or(10);
    let results = with_threads(cfg.threads, || run_monte_carlo(&dgp, &gd, &inf, reps))??;
    let out = prepare_out(cfg)?;
    let report = SimulateReport { design: dgp, engine: EngineSettings::of(&gd), results };
    write_json(&out.join("report.json"), &report)?;

    let path = out.join("estimates.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let to_io = |e: csv::Error| CliError::io(&path, e.into());
    let mut header = vec!["replication".to_owned()];
    header.extend((1..=report.design.p).map(|j| format!("b{j}")));
    w.write_record(&header).map_err(to_io)?;
    for (r, est) in report.results.estimates.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend(est.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub algorithm: Algorithm,
    pub updates: usize,
    pub median_update_seconds: Option<f64>,
    pub total_seconds: f64,
    pub final_rmse: Option<f64>,
    pub diverged: Option<String>,
}

/// Timing benchmark. Writes `traces.csv` and `bench.json`.
pub fn bench(cfg: &RunConfig) -> Result<Vec<BenchSummary>> {
    let dgp = cfg.dgp();
    let gd = cfg.gd_config()?;
    gd.validate_batch(dgp.n)?;
    let algorithms = cfg.algorithms.clone().unwrap_or_else(|| Algorithm::ALL.to_vec());
    let runs: Vec<_> = algorithms.iter().map(|&a| (a, gd.clone())).collect();
    let opts = BenchOptions { iters: cfg.iters.unwrap_or(200), pinned: true };
    let traces = run_bench(&dgp, &runs, opts)?;
    let out = prepare_out(cfg)?;
    let path = out.join("traces.csv");
    write_traces_csv(&traces, create(&path)?).map_err(|e| CliError::io(&path, e))?;
    let summary: Vec<BenchSummary> = traces
        .iter()
        .map(|t| BenchSummary {
            algorithm: t.algorithm,
            updates: t.points.len(),
            median_update_seconds: t.median_update_seconds(),
            total_seconds: t.points.last().map_or(0.0, |p| p.seconds),
            final_rmse: t.points.last().map(|p| p.rmse),
            diverged: t.diverged.clone(),
        })
        .collect();
    write_json(&out.join("bench.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub data: PathBuf,
    pub n: usize,
    pub p: usize,
    pub x0_column: String,
    pub transforms: Vec<TransformSummary>,
    pub engine: EngineSettings,
    pub level: f64,
    pub coefficients: Vec<CoefficientRow>,
    pub updates: usize,
    pub stopped_by_rule: bool,
    pub warning: Option<String>,
    pub link_curve_missing: usize,
}

/// Estimation on a CSV file. Writes `estimate.json` and `cdf_curve.csv`.
pub fn estimate(cfg: &RunConfig) -> Result<EstimateReport> {
    let data_path = cfg.data.clone().ok_or_else(|| CliError::Usage("estimate needs --data".into()))?;
    let schema = cfg.schema()?;
    let gd = cfg.gd_config()?;
    let inf = cfg.inference_config()?;
    let level = cfg.level.unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {level}")));
    }
    let ing = ingest_csv(&data_path, &schema)?;
    let d = &ing.dataset;
    gd.validate_batch(d.n())?;

    let (est, cov, curve) = with_threads(cfg.threads, || -> Result<_> {
        let est = run_akmbgd(d, &gd, &RunOptions::default())?;
        let cov = covariance(d, &est.beta_bar, &inf)?;
        let grid = GridSpec::span(cfg.grid_points.unwrap_or(201));
        let curve = estimate_cdf_curve(d, &est.beta_bar, &grid, &inf, cfg.monotone.unwrap_or(false))?;
        Ok((est, cov, curve))
    })??;
    let ci = confidence_intervals(&est.beta_bar, &cov, level)?;

    let coefficients = ing
        .covariates
        .iter()
        .zip(&est.beta_bar.beta)
        .zip(&cov.se)
        .zip(&ci)
        .map(|(((name, &b), &se), &(lo, hi))| CoefficientRow { name: name.clone(), estimate: b, se, ci_lo: lo, ci_hi: hi })
        .collect();

    let out = prepare_out(cfg)?;
    let path = out.join("cdf_curve.csv");
    curve.write_csv(create(&path)?).map_err(|e| CliError::io(&path, e))?;
    let report = EstimateReport {
        data: data_path,
        n: d.n(),
        p: d.p(),
        x0_column: schema.x0_column,
        transforms: ing.transforms,
        engine: EngineSettings::of(&gd),
        level,
        coefficients,
        updates: est.updates,
        stopped_by_rule: est.stopped_by_rule,
        warning: est.warning,
        link_curve_missing: curve.missing,
    };
    write_json(&out.join("estimate.json"), &report)?;
    Ok(report)
}
