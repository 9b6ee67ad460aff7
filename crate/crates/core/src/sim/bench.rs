use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dgp::{generate_dataset, DgpSpec};
use crate::error::{Error, Result};
use crate::gd::{bgd_step_known_g, logit_init, Estimator, GdConfig, IterationState};
use crate::nw::{NwOptions, NwPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    KbgdNaive,
    KbgdFast,
    KmbgdNaive,
    KmbgdFast,
    KnownG,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Self::KbgdNaive, Self::KbgdFast, Self::KmbgdNaive, Self::KmbgdFast, Self::KnownG];

    pub fn name(self) -> &'static str {
        match self {
            Self::KbgdNaive => "kbgd_naive",
            Self::KbgdFast => "kbgd_fast",
            Self::KmbgdNaive => "kmbgd_naive",
            Self::KmbgdFast => "kmbgd_fast",
            Self::KnownG => "known_g",
        }
    }

    fn path(self) -> NwPath {
        match self {
            Self::KbgdNaive | Self::KmbgdNaive => NwPath::Naive,
            _ => NwPath::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub k: usize,
    pub seconds: f64,
    pub rmse: f64,
    pub log_inv_rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTrace {
    pub algorithm: Algorithm,
    pub points: Vec<TracePoint>,
    /// Set when the trace ended early on divergence.
    pub diverged: Option<String>,
}

impl BenchTrace {
    /// Wall time of each individual update.
    pub fn per_update_seconds(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|p| {
                let d = p.seconds - prev;
                prev = p.seconds;
                d
            })
            .collect()
    }

    pub fn median_update_seconds(&self) -> Option<f64> {
        let mut v = self.per_update_seconds();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    }
}

/// Writes traces as CSV: `algorithm,k,seconds,rmse,log_inv_rmse`.
pub fn write_traces_csv<W: Write>(traces: &[BenchTrace], mut w: W) -> std::io::Result<()> {
    writeln!(w, "algorithm,k,seconds,rmse,log_inv_rmse")?;
    for t in traces {
        for p in &t.points {
            writeln!(w, "{},{},{},{},{}", t.algorithm.name(), p.k, p.seconds, p.rmse, p.log_inv_rmse)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub iters: usize,
    /// Run kernel sums on the calling thread only (for comparable timings).
    pub pinned: bool,
}

fn rmse(beta: &[f64], truth: &[f64]) -> f64 {
    (beta.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / beta.len() as f64).sqrt()
}

/// Runs each algorithm for `iters` updates from the common logistic start,
/// recording cumulative update time and coefficient RMSE after every update.
/// The kernel path is set by the algorithm tag.
pub fn run_bench(dgp: &DgpSpec, configs: &[(Algorithm, GdConfig<f64>)], opts: BenchOptions) -> Result<Vec<BenchTrace>> {
    let (data, _) = generate_dataset::<f64>(dgp)?;
    let start = logit_init(&data)?;
    let truth = &dgp.beta_star;
    let link = |t: f64| dgp.error.cdf(t);
    let mut out = Vec::with_capacity(configs.len());
    for (alg, cfg) in configs {
        let cfg = GdConfig {
            nw: NwOptions { path: alg.path(), parallel: cfg.nw.parallel && !opts.pinned },
            ..cfg.clone()
        };
        let mut trace = BenchTrace { algorithm: *alg, points: Vec::with_capacity(opts.iters), diverged: None };
        if opts.iters == 0 {
            out.push(trace);
            continue;
        }
        let est = Estimator::new(&data, &cfg, &start)?;
        let mut state = IterationState::new(start.clone(), cfg.seed, 0);
        for _ in 0..opts.iters {
            let step = match alg {
                Algorithm::KnownG => bgd_step_known_g(&mut state, &data, link, cfg.delta),
                Algorithm::KbgdNaive | Algorithm::KbgdFast => est.kbgd_step(&mut state),
                Algorithm::KmbgdNaive | Algorithm::KmbgdFast => est.kmbgd_step(&mut state).map(|_| ()),
            };
            match step {
                Ok(()) => {}
                Err(e @ Error::Divergence { .. }) => {
                    trace.diverged = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
            let e = rmse(&state.beta.beta, truth);
            trace.points.push(TracePoint { k: state.k, seconds: state.cumulative_seconds, rmse: e, log_inv_rmse: -e.ln() });
        }
        out.push(trace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ErrorFamily;

    #[test]
    fn zero_iterations_give_empty_traces() {
        let dgp = DgpSpec::new(300, 2, ErrorFamily::Logistic, 1);
        let cfgs: Vec<_> = Algorithm::ALL.iter().map(|&a| (a, GdConfig { batch_size: 100, ..GdConfig::default() })).collect();
        let t = run_bench(&dgp, &cfgs, BenchOptions { iters: 0, pinned: true }).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.iter().all(|t| t.points.is_empty()));
    }

    #[test]
    fn traces_are_time_ordered_and_csv_shaped() {
        let dgp = DgpSpec::new(400, 2, ErrorFamily::Logistic, 2);
        let cfgs: Vec<_> = Algorithm::ALL.iter().map(|&a| (a, GdConfig { batch_size: 100, ..GdConfig::default() })).collect();
        let t = run_bench(&dgp, &cfgs, BenchOptions { iters: 5, pinned: true }).unwrap();
        for tr in &t {
            assert_eq!(tr.points.len(), 5);
            assert!(tr.points.windows(2).all(|w| w[0].seconds <= w[1].seconds));
            assert!(tr.points.iter().all(|p| (p.log_inv_rmse + p.rmse.ln()).abs() < 1e-12));
        }
        let mut buf = Vec::new();
        write_traces_csv(&t, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 26);
        assert!(s.lines().nth(1).unwrap().starts_with("kbgd_naive,1,"));
    }

    #[test]
    fn divergence_ends_only_that_trace() {
        let dgp = DgpSpec::new(300, 2, ErrorFamily::Logistic, 3);
        let bad = GdConfig { delta: 1e9, batch_size: 100, ..GdConfig::default() };
        let good = GdConfig { batch_size: 100, ..GdConfig::default() };
        let t = run_bench(&dgp, &[(Algorithm::KnownG, bad), (Algorithm::KnownG, good)], BenchOptions { iters: 20, pinned: true })
            .unwrap();
        assert!(t[0].diverged.is_some());
        assert!(t[1].diverged.is_none());
        assert_eq!(t[1].points.len(), 20);
    }
}
