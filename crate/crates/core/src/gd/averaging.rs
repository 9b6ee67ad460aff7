//! Averaged mini-batch driver and moving-average stopping rule.

use serde::Serialize;

use super::{logit_init, Estimator, GdConfig, IterationState, StopRule};
use crate::error::{Error, Result};
use crate::model::{Coefficients, Dataset};
use crate::scalar::Real;

/// How much per-update history to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    #[default]
    Off,
    /// Elapsed time and, when a truth is supplied, RMSE against it.
    Summary,
    /// As `Summary` plus every iterate.
    Iterates,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<T> {
    /// Starting coefficients; the logistic initializer is used when absent.
    pub start: Option<Coefficients<T>>,
    pub trace: TraceLevel,
    pub truth: Option<Vec<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord<T> {
    /// Updates performed; `beta` is the iterate after update `k`.
    pub k: usize,
    pub seconds: f64,
    pub rmse: Option<T>,
    pub beta: Option<Vec<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedEstimate<T> {
    pub beta_bar: Coefficients<T>,
    pub start: Coefficients<T>,
    pub last_iterate: Coefficients<T>,
    pub updates: usize,
    /// Number of iterates averaged into `beta_bar`.
    pub averaged: usize,
    pub stopped_by_rule: bool,
    /// Set when the run ended without its convergence criterion being met.
    pub warning: Option<String>,
    pub floor: T,
    pub seconds: f64,
    pub trace: Vec<TraceRecord<T>>,
}

fn mean_of<'a, T: Real>(it: impl Iterator<Item = &'a Vec<T>>, p: usize, count: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); p];
    for v in it {
        for (a, &b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    let c = T::of_usize(count);
    acc.iter().map(|&a| a / c).collect()
}

/// True when the ring is full and the newest `window_t` iterates' mean is
/// within `rho` (sup norm, strictly) of the mean of the oldest `window_t`.
pub fn check_stop<T: Real>(state: &IterationState<T>, stop: &StopRule<T>) -> bool {
    let cap = stop.capacity();
    if state.ring.len() < cap || state.k < cap {
        return false;
    }
    let p = state.beta.len();
    let start = state.ring.len() - cap;
    let old = mean_of(state.ring.iter().skip(start).take(stop.window_t), p, stop.window_t);
    let new = mean_of(state.ring.iter().skip(start + stop.gap), p, stop.window_t);
    let gap = old.iter().zip(&new).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    gap < stop.rho
}

fn rmse<T: Real>(beta: &[T], truth: &[T]) -> T {
    let s: T = beta.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)).sum();
    (s / T::of_usize(beta.len())).sqrt()
}

/// Runs averaged KMBGD.
///
/// Without a stopping rule, performs `burn_in + follow_t` updates and returns
/// the mean of the iterates produced by updates `burn_in + 1 ..= burn_in +
/// follow_t`. With a stopping rule, updates until the rule fires (or
/// `max_iters` is exhausted, which sets `warning`) and returns the mean of
/// the last `window_t + gap` iterates.
pub fn run_akmbgd<T: Real>(data: &Dataset<T>, config: &GdConfig<T>, opts: &RunOptions<T>) -> Result<AveragedEstimate<T>> {
    let start = match &opts.start {
        Some(b) => b.clone(),
        None => logit_init(data)?,
    };
    if let Some(t) = &opts.truth {
        if t.len() != data.p() {
            return Err(Error::Usage("truth length does not match dataset".into()));
        }
    }
    config.validate_batch(data.n())?;
    let est = Estimator::new(data, config, &start)?;
    let cap = config.stop.map_or(0, |s| s.capacity());
    let mut state = IterationState::new(start.clone(), config.seed, cap);
    let mut trace = Vec::new();
    let budget = match config.stop {
        Some(_) => config.max_iters,
        None => config.burn_in + config.follow_t,
    };
    let mut stopped = false;
    while state.k < budget {
        est.kmbgd_step(&mut state)?;
        state.accumulate(config.burn_in);
        if opts.trace != TraceLevel::Off {
            trace.push(TraceRecord {
                k: state.k,
                seconds: state.cumulative_seconds,
                rmse: opts.truth.as_ref().map(|t| rmse(&state.beta.beta, t)),
                beta: (opts.trace == TraceLevel::Iterates).then(|| state.beta.beta.clone()),
            });
        }
        if let Some(stop) = &config.stop {
            if check_stop(&state, stop) {
                stopped = true;
                break;
            }
        }
    }
    let p = data.p();
    let (beta_bar, averaged, warning) = match &config.stop {
        Some(stop) => {
            let n = state.ring.len();
            let warning = (!stopped).then(|| {
                format!("stopping rule did not fire within {} updates; returning the recent average", config.max_iters)
            });
            (mean_of(state.ring.iter(), p, n), n.min(stop.capacity()), warning)
        }
        None => (state.average().expect("follow_t >= 1 guarantees averaged iterates"), state.avg_count, None),
    };
    Ok(AveragedEstimate {
        beta_bar: Coefficients::new(beta_bar)?,
        start,
        last_iterate: state.beta.clone(),
        updates: state.k,
        averaged,
        stopped_by_rule: stopped,
        warning,
        floor: est.floor(),
        seconds: state.cumulative_seconds,
        trace,
    })
}
