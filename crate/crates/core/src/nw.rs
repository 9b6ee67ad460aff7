//! Nadaraya-Watson regression on a scalar index.
//!
//! All estimators are built from kernel-weighted sums
//! `A_w(z) = (1 / (m h)) * sum_j K((z - z_j) / h) * w_j`
//! over a data sample of size `m`. The sample is sorted by index value once
//! and every sum runs over it in ascending order. The naive path visits all
//! `m` points; the fast path binary-searches the window `[z - h, z + h]` and
//! visits only those. Terms outside the window are exactly zero, so both
//! paths produce identical bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::Real;

/// How kernel sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NwPath {
    /// Quadratic loop over every data point.
    Naive,
    /// Sorted-window search exploiting the compact kernel support.
    #[default]
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NwOptions {
    pub path: NwPath,
    /// Spread evaluation points over the rayon pool. Outputs are per point,
    /// so results do not depend on this flag.
    pub parallel: bool,
}

impl NwOptions {
    pub fn serial(path: NwPath) -> Self {
        Self { path, parallel: false }
    }
}

/// Kernel-weighted mean of `y` (`num`) and kernel density estimate (`den`)
/// at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NWComponents<T> {
    pub num: T,
    pub den: T,
}

/// Lower bound on the subsample density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum TruncationFloor<T> {
    /// Use this floor as is.
    Fixed(T),
    /// Floor is this fraction of the median full-sample density estimate at
    /// the starting coefficients, resolved once per run.
    DensityFraction(T),
}

/// Default density fraction. Larger fractions bind on isolated tail points
/// of an untrimmed index (whose self-term alone gives `K(0) / (B h)`), which
/// biases the link estimate there toward zero and inflates the coefficients.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.001;

impl<T: Real> Default for TruncationFloor<T> {
    fn default() -> Self {
        TruncationFloor::DensityFraction(T::of(DEFAULT_FLOOR_FRACTION))
    }
}

impl<T: Real> TruncationFloor<T> {
    pub fn validate(&self) -> Result<()> {
        let (TruncationFloor::Fixed(c) | TruncationFloor::DensityFraction(c)) = *self;
        if c > T::zero() && c.is_finite() {
            Ok(())
        } else {
            Err(Error::Usage(format!("truncation floor must be positive, got {c}")))
        }
    }
}

/// Data sorted ascending by index value with the permutation retained.
#[derive(Debug, Clone)]
struct Sorted<T> {
    z: Vec<T>,
    /// `order[k]` is the original position of the `k`-th smallest value.
    order: Vec<usize>,
}

impl<T: Real> Sorted<T> {
    fn new(data_z: &[T]) -> Result<Self> {
        if data_z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("index values must be finite".into()));
        }
        let mut order: Vec<usize> = (0..data_z.len()).collect();
        order.sort_by(|&a, &b| data_z[a].partial_cmp(&data_z[b]).expect("finite"));
        let z = order.iter().map(|&i| data_z[i]).collect();
        Ok(Self { z, order })
    }

    fn gather(&self, w: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| w[i]).collect()
    }

    /// Index range of sorted points that can have nonzero weight at `z`.
    /// Slightly wider than `[z - h, z + h]`; extra points evaluate to zero.
    #[inline]
    fn window(&self, z: T, h: T, path: NwPath) -> std::ops::Range<usize> {
        match path {
            NwPath::Naive => 0..self.z.len(),
            NwPath::Fast => {
                let reach = h * (T::one() + T::of(1e-9));
                let lo = self.z.partition_point(|&v| v < z - reach);
                let hi = self.z.partition_point(|&v| v <= z + reach);
                lo..hi.max(lo)
            }
        }
    }
}

fn check_common<T: Real>(data_len: usize, w_len: usize, h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Usage(format!("bandwidth must be positive, got {h}")));
    }
    if data_len == 0 {
        return Err(Error::Usage("kernel regression needs at least one data point".into()));
    }
    if data_len != w_len {
        return Err(Error::Usage(format!(
            "index values ({data_len}) and responses ({w_len}) differ in length"
        )));
    }
    Ok(())
}

fn map_points<T, R, F>(eval_z: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Real,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if parallel {
        eval_z.par_iter().map(|&z| f(z)).collect()
    } else {
        eval_z.iter().map(|&z| f(z)).collect()
    }
}

/// `(sum K, sum K*y)` at `z`, in ascending data order.
#[inline]
fn pair_sums<T: Real>(s: &Sorted<T>, ys: &[T], z: T, inv_h: T, h: T, k: &KernelSpec<T>, path: NwPath) -> (T, T) {
    let mut s1 = T::zero();
    let mut sy = T::zero();
    for j in s.window(z, h, path) {
        let w = k.eval((z - s.z[j]) * inv_h);
        s1 += w;
        sy += w * ys[j];
    }
    (s1, sy)
}

fn components_impl<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<NWComponents<T>>> {
    check_common(data_z.len(), y.len(), h)?;
    let sorted = Sorted::new(data_z)?;
    let ys = sorted.gather(y);
    let inv_h = T::one() / h;
    let scale = T::one() / (T::of_usize(data_z.len()) * h);
    Ok(map_points(eval_z, opts.parallel, |z| {
        let (s1, sy) = pair_sums(&sorted, &ys, z, inv_h, h, kernel, opts.path);
        NWComponents { num: sy * scale, den: s1 * scale }
    }))
}

/// `A_y` and `A_1` at each evaluation point through the sorted-window path.
pub fn fast_window_eval<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
) -> Result<Vec<NWComponents<T>>> {
    components_impl(eval_z, data_z, y, h, kernel, NwOptions::serial(NwPath::Fast))
}

/// Reference quadratic evaluation of the same components.
pub fn naive_eval<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
) -> Result<Vec<NWComponents<T>>> {
    components_impl(eval_z, data_z, y, h, kernel, NwOptions::serial(NwPath::Naive))
}

/// `A_y` and `A_1` with an explicit path choice.
pub fn nw_components<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<NWComponents<T>>> {
    components_impl(eval_z, data_z, y, h, kernel, opts)
}

/// Full-sample estimate `G(z) = A_y(z) / A_1(z)`. Points with a zero density
/// estimate come back as `None`.
pub fn nw_full<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<Option<T>>> {
    Ok(components_impl(eval_z, data_z, y, h, kernel, opts)?
        .into_iter()
        .map(|c| if c.den == T::zero() { None } else { Some(c.num / c.den) })
        .collect())
}

/// Subsample estimate with truncated denominator, `A_y / max(A_1, c_f)`.
/// `c_f` is the resolved (absolute) floor.
pub fn nw_subsample_truncated<T: Real>(
    eval_z: &[T],
    sub_z: &[T],
    sub_y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    c_f: T,
    opts: NwOptions,
) -> Result<Vec<T>> {
    if sub_z.is_empty() {
        return Err(Error::Usage("subsample is empty".into()));
    }
    if !(c_f > T::zero()) {
        return Err(Error::Usage(format!("truncation floor must be positive, got {c_f}")));
    }
    Ok(components_impl(eval_z, sub_z, sub_y, h, kernel, opts)?
        .into_iter()
        .map(|c| c.num / c.den.max(c_f))
        .collect())
}

/// Kernel sums of several weight columns, plus optionally the sums with
/// `K'` in place of `K`. Column 0 of the output is the plain kernel sum.
fn multi_sums<T: Real>(
    s: &Sorted<T>,
    cols: &[Vec<T>],
    z: T,
    inv_h: T,
    h: T,
    k: &KernelSpec<T>,
    path: NwPath,
    with_deriv: bool,
) -> (Vec<T>, Vec<T>) {
    let q = cols.len();
    let mut sums = vec![T::zero(); q + 1];
    let mut dsums = vec![T::zero(); if with_deriv { q + 1 } else { 0 }];
    for j in s.window(z, h, path) {
        let u = (z - s.z[j]) * inv_h;
        if with_deriv {
            let (w, dw) = k.eval_with_deriv(u);
            sums[0] += w;
            dsums[0] += dw;
            for c in 0..q {
                sums[c + 1] += w * cols[c][j];
                dsums[c + 1] += dw * cols[c][j];
            }
        } else {
            let w = k.eval(u);
            sums[0] += w;
            for c in 0..q {
                sums[c + 1] += w * cols[c][j];
            }
        }
    }
    (sums, dsums)
}

/// Derivative of the full-sample estimate,
/// `G'(z) = (A'_y A_1 - A_y A'_1) / A_1^2` with
/// `A'_w(z) = (1 / (m h^2)) sum_j K'((z - z_j) / h) w_j`.
pub fn nw_deriv<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<Option<T>>> {
    Ok(nw_value_and_deriv(eval_z, data_z, y, h, kernel, opts)?
        .into_iter()
        .map(|v| v.map(|(_, d)| d))
        .collect())
}

/// `(G(z), G'(z))` in one pass; `None` where the density estimate is zero.
pub fn nw_value_and_deriv<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    y: &[T],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<Option<(T, T)>>> {
    check_common(data_z.len(), y.len(), h)?;
    let sorted = Sorted::new(data_z)?;
    let cols = vec![sorted.gather(y)];
    let inv_h = T::one() / h;
    let m = T::of_usize(data_z.len());
    let scale = T::one() / (m * h);
    let dscale = scale * inv_h;
    Ok(map_points(eval_z, opts.parallel, |z| {
        let (s, d) = multi_sums(&sorted, &cols, z, inv_h, h, kernel, opts.path, true);
        let a1 = s[0] * scale;
        if a1 == T::zero() {
            return None;
        }
        let ay = s[1] * scale;
        let da1 = d[0] * dscale;
        let day = d[1] * dscale;
        Some((ay / a1, (day * a1 - ay * da1) / (a1 * a1)))
    }))
}

/// Column-wise estimates of `E(col | z)`. `columns` holds `q` columns, each
/// of the same length as `data_z`. One row per evaluation point, `None`
/// where the density estimate is zero.
pub fn nw_conditional_mean<T: Real>(
    eval_z: &[T],
    data_z: &[T],
    columns: &[Vec<T>],
    h: T,
    kernel: &KernelSpec<T>,
    opts: NwOptions,
) -> Result<Vec<Option<Vec<T>>>> {
    check_common(data_z.len(), data_z.len(), h)?;
    if let Some(c) = columns.iter().find(|c| c.len() != data_z.len()) {
        return Err(Error::Usage(format!(
            "column length {} does not match {} index values",
            c.len(),
            data_z.len()
        )));
    }
    let sorted = Sorted::new(data_z)?;
    let cols: Vec<Vec<T>> = columns.iter().map(|c| sorted.gather(c)).collect();
    let inv_h = T::one() / h;
    Ok(map_points(eval_z, opts.parallel, |z| {
        let (s, _) = multi_sums(&sorted, &cols, z, inv_h, h, kernel, opts.path, false);
        if s[0] == T::zero() {
            None
        } else {
            Some(s[1..].iter().map(|&v| v / s[0]).collect())
        }
    }))
}
