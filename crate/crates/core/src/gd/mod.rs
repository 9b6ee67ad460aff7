//! Gradient-descent engines for the monotone index model.
//!
//! Every engine updates only the free coefficients:
//! `beta <- beta - (delta / m) * sum_i (G_i - y_i) * mask_i * x_i`,
//! and differs only in which observations enter the sum and where `G_i`
//! comes from:
//!
//! * known-link BGD: all `n` observations, `G_i = G(z_i)` for a supplied link;
//! * KBGD: all `n` observations, `G_i` from full-sample kernel regression;
//! * KMBGD: a with-replacement subsample of size `B`, `G_i` from kernel
//!   regression on that subsample with a truncated denominator.

mod averaging;
mod logit;

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{bandwidth, make_kernel, BandwidthRule, KernelSpec};
use crate::model::{compute_index, trimming_mask, Coefficients, Dataset, TrimmingSpec};
use crate::nw::{nw_components, nw_full, nw_subsample_truncated, NwOptions, TruncationFloor};
use crate::scalar::Real;

pub use averaging::{check_stop, run_akmbgd, AveragedEstimate, RunOptions, TraceLevel, TraceRecord};
pub use logit::{logit_fit, logit_init, LogitFit};

/// Iterates whose Euclidean norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Moving-average stopping rule: once `window_t + gap` iterates exist, stop
/// when the mean of the newest `window_t` iterates and the mean of the
/// `window_t` iterates `gap` steps older differ by less than `rho` in every
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StopRule<T> {
    pub window_t: usize,
    pub gap: usize,
    pub rho: T,
}

impl<T: Real> StopRule<T> {
    pub fn new(window_t: usize, gap: usize, rho: T) -> Result<Self> {
        let rule = Self { window_t, gap, rho };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_t < 1 || self.gap < 1 || !(self.rho > T::zero()) {
            return Err(Error::Usage(format!(
                "stopping rule needs window_t >= 1, gap >= 1, rho > 0 (got {}, {}, {})",
                self.window_t, self.gap, self.rho
            )));
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.window_t + self.gap
    }
}

/// Hyperparameters shared by all engines.
#[derive(Debug, Clone)]
pub struct GdConfig<T> {
    /// Constant learning rate.
    pub delta: T,
    pub trimming: TrimmingSpec<T>,
    pub floor: TruncationFloor<T>,
    /// Subsample size `B`.
    pub batch_size: usize,
    pub kernel: KernelSpec<T>,
    pub bw_rule: BandwidthRule<T>,
    /// Compute `h` once at the starting coefficients instead of every step.
    pub freeze_bandwidth: bool,
    /// Burn-in updates `k*` discarded before averaging.
    pub burn_in: usize,
    /// Number of averaged iterates `T`.
    pub follow_t: usize,
    pub stop: Option<StopRule<T>>,
    /// Update budget when a stopping rule is in force.
    pub max_iters: usize,
    pub seed: u64,
    pub nw: NwOptions,
}

impl<T: Real> Default for GdConfig<T> {
    fn default() -> Self {
        Self {
            delta: T::one(),
            trimming: TrimmingSpec::None,
            floor: TruncationFloor::default(),
            batch_size: 1000,
            kernel: make_kernel(6).expect("order 6 is supported"),
            bw_rule: BandwidthRule::default(),
            freeze_bandwidth: false,
            burn_in: 2000,
            follow_t: 3000,
            stop: None,
            max_iters: 100_000,
            seed: 0,
            nw: NwOptions::default(),
        }
    }
}

impl<T: Real> GdConfig<T> {
    /// `1 <= B <= n`, required by the mini-batch engines.
    pub fn validate_batch(&self, n: usize) -> Result<()> {
        if self.batch_size < 1 || self.batch_size > n {
            return Err(Error::Usage(format!(
                "subsample size must satisfy 1 <= B <= n = {n}, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Long-run preset: 40000 burn-in updates followed by 10000 averaged ones.
    pub fn long_run() -> Self {
        Self { batch_size: 3000, burn_in: 40_000, follow_t: 10_000, ..Self::default() }
    }

    /// Checks everything except the subsample size.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::Usage(format!("learning rate must be positive, got {}", self.delta)));
        }
        if self.follow_t < 1 {
            return Err(Error::Usage("follow-up length T must be at least 1".into()));
        }
        self.trimming.validate()?;
        self.floor.validate()?;
        self.bw_rule.validate()?;
        if let Some(stop) = &self.stop {
            stop.validate()?;
        }
        Ok(())
    }
}

/// Subsample index multiset drawn at update `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleDraw {
    pub indices: Vec<usize>,
    pub k: usize,
}

/// Evolving iterate plus averaging accumulators.
#[derive(Debug, Clone)]
pub struct IterationState<T> {
    /// Updates performed so far; the current iterate is `beta_{k+1}`.
    pub k: usize,
    pub beta: Coefficients<T>,
    /// Most recent iterates, oldest first, bounded by `ring_capacity`.
    pub ring: VecDeque<Vec<T>>,
    pub ring_capacity: usize,
    /// Sum of post-burn-in iterates.
    pub avg_sum: Vec<T>,
    pub avg_count: usize,
    pub cumulative_seconds: f64,
    rng: ChaCha8Rng,
}

impl<T: Real> IterationState<T> {
    pub fn new(start: Coefficients<T>, seed: u64, ring_capacity: usize) -> Self {
        let p = start.len();
        let mut state = Self {
            k: 0,
            beta: start,
            ring: VecDeque::with_capacity(ring_capacity),
            ring_capacity,
            avg_sum: vec![T::zero(); p],
            avg_count: 0,
            cumulative_seconds: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let first = state.beta.beta.clone();
        state.push_iterate(first);
        state
    }

    /// Appends an iterate to the ring, evicting the oldest when full.
    pub fn push_iterate(&mut self, beta: Vec<T>) {
        if self.ring_capacity == 0 {
            return;
        }
        if self.ring.len() == self.ring_capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(beta);
    }

    /// Adds the current iterate to the running average when past burn-in.
    fn accumulate(&mut self, burn_in: usize) {
        if self.k > burn_in {
            for (s, &b) in self.avg_sum.iter_mut().zip(&self.beta.beta) {
                *s += b;
            }
            self.avg_count += 1;
        }
    }

    pub fn average(&self) -> Option<Vec<T>> {
        (self.avg_count > 0).then(|| {
            let c = T::of_usize(self.avg_count);
            self.avg_sum.iter().map(|&s| s / c).collect()
        })
    }
}

/// Draws `B` indices uniformly from `[0, n)` with replacement.
pub fn draw_subsample<T: Real>(state: &mut IterationState<T>, n: usize, b: usize) -> Result<SubsampleDraw> {
    if b < 1 || b > n {
        return Err(Error::Usage(format!("subsample size must satisfy 1 <= B <= n = {n}, got {b}")));
    }
    let indices = (0..b).map(|_| state.rng.random_range(0..n)).collect();
    Ok(SubsampleDraw { indices, k: state.k + 1 })
}

/// Accumulates `sum (g_i - y_i) mask_i x_i` over `(observation, g)` pairs in
/// the given order and applies `beta -= delta / m * sum`.
fn descend<T: Real>(
    data: &Dataset<T>,
    mask: &[T],
    beta: &mut [T],
    delta: T,
    m: usize,
    terms: impl Iterator<Item = (usize, T)>,
) {
    let mut grad = vec![T::zero(); beta.len()];
    for (i, g) in terms {
        if mask[i] == T::zero() {
            continue;
        }
        let r = (g - data.y()[i]) * mask[i];
        for (gj, &xij) in grad.iter_mut().zip(data.row(i)) {
            *gj += r * xij;
        }
    }
    let step = delta / T::of_usize(m);
    for (b, g) in beta.iter_mut().zip(grad) {
        *b -= step * g;
    }
}

fn check_divergence<T: Real>(state: &IterationState<T>) -> Result<()> {
    let norm = state.beta.norm();
    if !norm.is_finite() || norm.as_f64() > DIVERGENCE_NORM {
        return Err(Error::Divergence { k: state.k, norm: norm.as_f64() });
    }
    Ok(())
}

/// One known-link batch update over all observations (no trimming).
pub fn bgd_step_known_g<T, G>(state: &mut IterationState<T>, data: &Dataset<T>, link: G, delta: T) -> Result<()>
where
    T: Real,
    G: Fn(T) -> T,
{
    if state.beta.len() != data.p() {
        return Err(Error::Usage("coefficient length does not match dataset".into()));
    }
    let start = Instant::now();
    let g: Vec<T> = (0..data.n()).map(|i| link(data.index_at(i, &state.beta.beta))).collect();
    let mask = vec![T::one(); data.n()];
    descend(data, &mask, &mut state.beta.beta, delta, data.n(), g.into_iter().enumerate());
    finish_step(state, start)
}

fn finish_step<T: Real>(state: &mut IterationState<T>, start: Instant) -> Result<()> {
    state.k += 1;
    state.cumulative_seconds += start.elapsed().as_secs_f64();
    let current = state.beta.beta.clone();
    state.push_iterate(current);
    check_divergence(state)
}

/// Per-run context for the kernel-based engines: the dataset, trimming mask,
/// resolved truncation floor and (optionally) frozen bandwidth.
#[derive(Debug)]
pub struct Estimator<'a, T> {
    data: &'a Dataset<T>,
    config: &'a GdConfig<T>,
    mask: Vec<T>,
    floor: T,
    frozen_h: Option<T>,
}

impl<'a, T: Real> Estimator<'a, T> {
    /// Validates the configuration and resolves the data-dependent pieces
    /// (floor, frozen bandwidth) at the starting coefficients.
    pub fn new(data: &'a Dataset<T>, config: &'a GdConfig<T>, start: &Coefficients<T>) -> Result<Self> {
        config.validate()?;
        if start.len() != data.p() {
            return Err(Error::Usage(format!(
                "starting coefficients have length {}, expected {}",
                start.len(),
                data.p()
            )));
        }
        let mask = trimming_mask(data, &config.trimming)?;
        let needs_full_h =
            config.freeze_bandwidth || matches!(config.floor, TruncationFloor::DensityFraction(_));
        let (z0, h0) = if needs_full_h {
            let z = compute_index(data, start)?.z;
            let h = bandwidth(&config.bw_rule, &z, data.n())?;
            (z, Some(h))
        } else {
            (Vec::new(), None)
        };
        let floor = match config.floor {
            TruncationFloor::Fixed(c) => c,
            TruncationFloor::DensityFraction(frac) => {
                let h = h0.expect("bandwidth resolved above");
                let mut dens: Vec<T> = nw_components(&z0, &z0, data.y(), h, &config.kernel, config.nw)?
                    .into_iter()
                    .map(|c| c.den)
                    .collect();
                dens.sort_by(|a, b| a.partial_cmp(b).expect("finite density"));
                let median = crate::model::quantile_sorted(&dens, T::of(0.5));
                if !(median > T::zero()) {
                    return Err(Error::DegenerateData(
                        "median density estimate is not positive; set a fixed floor".into(),
                    ));
                }
                frac * median
            }
        };
        let frozen_h = if config.freeze_bandwidth { h0 } else { None };
        Ok(Self { data, config, mask, floor, frozen_h })
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn mask(&self) -> &[T] {
        &self.mask
    }

    pub fn config(&self) -> &GdConfig<T> {
        self.config
    }

    fn bandwidth_for(&self, z: &[T]) -> Result<T> {
        match self.frozen_h {
            Some(h) => Ok(h),
            None => bandwidth(&self.config.bw_rule, z, self.data.n()),
        }
    }

    /// Full-sample kernel update. Observations whose density estimate is
    /// exactly zero contribute nothing.
    pub fn kbgd_step(&self, state: &mut IterationState<T>) -> Result<()> {
        let start = Instant::now();
        let data = self.data;
        let z = compute_index(data, &state.beta)?.z;
        let h = self.bandwidth_for(&z)?;
        let g = nw_full(&z, &z, data.y(), h, &self.config.kernel, self.config.nw)?;
        let terms = g.into_iter().enumerate().map(|(i, gi)| (i, gi.unwrap_or(data.y()[i])));
        descend(data, &self.mask, &mut state.beta.beta, self.config.delta, data.n(), terms);
        finish_step(state, start)
    }

    /// Mini-batch kernel update on a freshly drawn subsample.
    pub fn kmbgd_step(&self, state: &mut IterationState<T>) -> Result<SubsampleDraw> {
        let start = Instant::now();
        let draw = draw_subsample(state, self.data.n(), self.config.batch_size)?;
        self.kmbgd_update(state, &draw.indices, start)?;
        Ok(draw)
    }

    /// Mini-batch kernel update on a given index multiset. Duplicates count
    /// with multiplicity in both the kernel sums and the gradient.
    pub fn kmbgd_step_with(&self, state: &mut IterationState<T>, indices: &[usize]) -> Result<()> {
        self.kmbgd_update(state, indices, Instant::now())
    }

    fn kmbgd_update(&self, state: &mut IterationState<T>, indices: &[usize], start: Instant) -> Result<()> {
        let data = self.data;
        if indices.is_empty() || indices.iter().any(|&i| i >= data.n()) {
            return Err(Error::Usage("subsample indices must be non-empty and in range".into()));
        }
        let z: Vec<T> = indices.iter().map(|&i| data.index_at(i, &state.beta.beta)).collect();
        let y: Vec<T> = indices.iter().map(|&i| data.y()[i]).collect();
        let h = self.bandwidth_for(&z)?;
        let g = nw_subsample_truncated(&z, &z, &y, h, &self.config.kernel, self.floor, self.config.nw)?;
        let terms = indices.iter().copied().zip(g);
        descend(data, &self.mask, &mut state.beta.beta, self.config.delta, indices.len(), terms);
        finish_step(state, start)
    }

    /// Subsample gradient `(1/B) sum (G_i - y_i) X_i^phi` with a caller
    /// supplied `G` per observation (no update applied).
    pub fn subsample_gradient(&self, indices: &[usize], g_of: impl Fn(usize) -> T) -> Vec<T> {
        let mut beta = vec![T::zero(); self.data.p()];
        descend(self.data, &self.mask, &mut beta, T::one(), indices.len(), indices.iter().map(|&i| (i, g_of(i))));
        beta.iter().map(|&b| -b).collect()
    }
}

/// Free-function form of [`Estimator::kbgd_step`].
pub fn kbgd_step<T: Real>(state: &mut IterationState<T>, data: &Dataset<T>, config: &GdConfig<T>) -> Result<()> {
    Estimator::new(data, &fixed_floor_view(config), &state.beta)?.kbgd_step(state)
}

/// Free-function form of [`Estimator::kmbgd_step`]. A density-fraction floor
/// is resolved at the current iterate.
pub fn kmbgd_step<T: Real>(
    state: &mut IterationState<T>,
    data: &Dataset<T>,
    config: &GdConfig<T>,
) -> Result<SubsampleDraw> {
    Estimator::new(data, config, &state.beta)?.kmbgd_step(state)
}

fn fixed_floor_view<T: Real>(config: &GdConfig<T>) -> GdConfig<T> {
    // KBGD never reads the floor; skip resolving it.
    GdConfig { floor: TruncationFloor::Fixed(T::one()), ..config.clone() }
}
