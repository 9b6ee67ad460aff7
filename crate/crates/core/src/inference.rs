//! Plug-in asymptotic covariance, confidence intervals and link-curve export.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{bandwidth, make_kernel, BandwidthRule, KernelSpec};
use crate::linalg::{condition_number, Lu, Matrix};
use crate::model::{compute_index, trimming_mask, Coefficients, Dataset, TrimmingSpec};
use crate::nw::{nw_conditional_mean, nw_full, nw_value_and_deriv, NwOptions};
use crate::scalar::Real;

/// Condition numbers above this make the sensitivity matrix unusable.
pub const MAX_CONDITION: f64 = 1e12;
/// Bounds applied to the link estimate inside the variance weight.
pub const LINK_CLAMP: f64 = 1e-6;

/// Smoothing choices for variance estimation and curve export.
#[derive(Debug, Clone)]
pub struct InferenceConfig<T> {
    pub kernel: KernelSpec<T>,
    pub bw_rule: BandwidthRule<T>,
    pub trimming: TrimmingSpec<T>,
    pub nw: NwOptions,
}

impl<T: Real> Default for InferenceConfig<T> {
    fn default() -> Self {
        Self {
            kernel: make_kernel(6).expect("order 6 is supported"),
            bw_rule: BandwidthRule::default(),
            trimming: TrimmingSpec::None,
            nw: NwOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEstimate<T> {
    pub n: usize,
    pub p: usize,
    pub lambda_hat: Matrix<T>,
    pub sigma_xi_hat: Matrix<T>,
    pub sigma_beta_hat: Matrix<T>,
    pub se: Vec<T>,
    /// Observations skipped because a kernel estimate was undefined.
    pub missing: usize,
}

struct Fitted<T> {
    z: Vec<T>,
    h: T,
    mask: Vec<T>,
}

fn fit<T: Real>(data: &Dataset<T>, beta: &Coefficients<T>, cfg: &InferenceConfig<T>) -> Result<Fitted<T>> {
    if beta.beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Usage("coefficients must be finite".into()));
    }
    let z = compute_index(data, beta)?.z;
    let h = bandwidth(&cfg.bw_rule, &z, data.n())?;
    let mask = trimming_mask(data, &cfg.trimming)?;
    Ok(Fitted { z, h, mask })
}

fn columns<T: Real>(data: &Dataset<T>, mask: Option<&[T]>) -> Vec<Vec<T>> {
    (0..data.p())
        .map(|j| {
            let mut c = data.column(j);
            if let Some(m) = mask {
                c.iter_mut().zip(m).for_each(|(v, &w)| *v *= w);
            }
            c
        })
        .collect()
}

fn lambda_impl<T: Real>(data: &Dataset<T>, f: &Fitted<T>, cfg: &InferenceConfig<T>) -> Result<(Matrix<T>, usize)> {
    let p = data.p();
    let mut out = Matrix::zeros(p, p);
    if f.mask.iter().all(|&m| m == T::zero()) {
        return Ok((out, 0));
    }
    let gd = nw_value_and_deriv(&f.z, &f.z, data.y(), f.h, &cfg.kernel, cfg.nw)?;
    let ex = nw_conditional_mean(&f.z, &f.z, &columns(data, None), f.h, &cfg.kernel, cfg.nw)?;
    let mut missing = 0;
    for i in 0..data.n() {
        if f.mask[i] == T::zero() {
            continue;
        }
        let (Some((_, d)), Some(e)) = (gd[i], &ex[i]) else {
            missing += 1;
            continue;
        };
        let x = data.row(i);
        let w = f.mask[i] * d;
        for a in 0..p {
            let wa = w * x[a];
            for b in 0..p {
                out[(a, b)] += wa * (x[b] - e[b]);
            }
        }
    }
    out.scale(T::one() / T::of_usize(data.n()));
    Ok((out, missing))
}

fn sigma_xi_impl<T: Real>(data: &Dataset<T>, f: &Fitted<T>, cfg: &InferenceConfig<T>) -> Result<(Matrix<T>, usize)> {
    let p = data.p();
    let g = nw_full(&f.z, &f.z, data.y(), f.h, &cfg.kernel, cfg.nw)?;
    let xphi = columns(data, Some(&f.mask));
    let ex = nw_conditional_mean(&f.z, &f.z, &xphi, f.h, &cfg.kernel, cfg.nw)?;
    let lo = T::of(LINK_CLAMP);
    let hi = T::one() - lo;
    let mut out = Matrix::zeros(p, p);
    let mut missing = 0;
    let mut r = vec![T::zero(); p];
    for i in 0..data.n() {
        let (Some(gi), Some(e)) = (g[i], &ex[i]) else {
            missing += 1;
            continue;
        };
        let gc = gi.max(lo).min(hi);
        let w = gc * (T::one() - gc);
        for j in 0..p {
            r[j] = xphi[j][i] - e[j];
        }
        for a in 0..p {
            for b in a..p {
                out[(a, b)] += w * r[a] * r[b];
            }
        }
    }
    let inv_n = T::one() / T::of_usize(data.n());
    for a in 0..p {
        for b in a..p {
            let v = out[(a, b)] * inv_n;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok((out, missing))
}

/// Sensitivity matrix `(1/n) sum_i mask_i G'(z_i) x_i (x_i - E(X | z_i))'`.
pub fn estimate_lambda<T: Real>(data: &Dataset<T>, beta: &Coefficients<T>, cfg: &InferenceConfig<T>) -> Result<Matrix<T>> {
    let f = fit(data, beta, cfg)?;
    Ok(lambda_impl(data, &f, cfg)?.0)
}

/// Score variance `(1/n) sum_i G(1 - G) r_i r_i'` with
/// `r_i = x_i^phi - E(X^phi | z_i)` and `G` clamped away from 0 and 1.
pub fn estimate_sigma_xi<T: Real>(data: &Dataset<T>, beta: &Coefficients<T>, cfg: &InferenceConfig<T>) -> Result<Matrix<T>> {
    let f = fit(data, beta, cfg)?;
    Ok(sigma_xi_impl(data, &f, cfg)?.0)
}

/// Sandwich `Lambda^-1 Sigma Lambda^-T`, symmetrized.
pub fn sandwich<T: Real>(lambda: &Matrix<T>, sigma: &Matrix<T>) -> Result<Matrix<T>> {
    let cond = condition_number(lambda);
    if !(cond.as_f64() <= MAX_CONDITION) {
        return Err(Error::Singular(format!(
            "sensitivity matrix is ill-conditioned (condition number {:.3e}); try a larger sample or a different bandwidth",
            cond.as_f64()
        )));
    }
    let lu = Lu::factor(lambda)?;
    let left = lu.solve(sigma);
    Ok(lu.solve(&left.transpose()).transpose().symmetrized())
}

fn assemble<T: Real>(n: usize, lambda: Matrix<T>, sigma: Matrix<T>, missing: usize) -> Result<CovarianceEstimate<T>> {
    let sigma_beta = sandwich(&lambda, &sigma)?;
    let nt = T::of_usize(n);
    let se = sigma_beta.diag().iter().map(|&v| (v.max(T::zero()) / nt).sqrt()).collect();
    Ok(CovarianceEstimate {
        n,
        p: lambda.rows,
        lambda_hat: lambda,
        sigma_xi_hat: sigma,
        sigma_beta_hat: sigma_beta,
        se,
        missing,
    })
}

/// Plug-in covariance of the averaged estimator.
pub fn covariance<T: Real>(
    data: &Dataset<T>,
    beta: &Coefficients<T>,
    cfg: &InferenceConfig<T>,
) -> Result<CovarianceEstimate<T>> {
    let f = fit(data, beta, cfg)?;
    let (lambda, m1) = lambda_impl(data, &f, cfg)?;
    let (sigma, m2) = sigma_xi_impl(data, &f, cfg)?;
    assemble(data.n(), lambda, sigma, m1.max(m2))
}

/// Covariance from pre-computed `Lambda` and `Sigma_xi`.
pub fn covariance_from_parts<T: Real>(n: usize, lambda: Matrix<T>, sigma: Matrix<T>) -> Result<CovarianceEstimate<T>> {
    assemble(n, lambda, sigma, 0)
}

/// Sandwich covariance of the known-link estimator: `H = (1/n) sum G' x x'`,
/// `Omega = (1/n) sum G (1 - G) x x'`.
pub fn known_link_covariance<T, G, D>(
    data: &Dataset<T>,
    beta: &Coefficients<T>,
    link: G,
    link_deriv: D,
) -> Result<CovarianceEstimate<T>>
where
    T: Real,
    G: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let p = data.p();
    let mut h = Matrix::zeros(p, p);
    let mut om = Matrix::zeros(p, p);
    for i in 0..data.n() {
        let z = data.index_at(i, &beta.beta);
        let (g, d) = (link(z), link_deriv(z));
        let v = g * (T::one() - g);
        let x = data.row(i);
        for a in 0..p {
            for b in 0..p {
                let xx = x[a] * x[b];
                h[(a, b)] += d * xx;
                om[(a, b)] += v * xx;
            }
        }
    }
    let inv_n = T::one() / T::of_usize(data.n());
    h.scale(inv_n);
    om.scale(inv_n);
    assemble(data.n(), h, om, 0)
}

/// Two-sided normal intervals `beta_j +- q se_j` at the given level.
pub fn confidence_intervals<T: Real>(beta: &Coefficients<T>, cov: &CovarianceEstimate<T>, level: f64) -> Result<Vec<(T, T)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Usage(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if beta.len() != cov.se.len() {
        return Err(Error::Usage("coefficient and standard-error lengths differ".into()));
    }
    let q = T::of(normal_quantile((1.0 + level) / 2.0));
    Ok(beta.beta.iter().zip(&cov.se).map(|(&b, &s)| (b - q * s, b + q * s)).collect())
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Evaluation grid for the link curve. Bounds default to the range of the
/// fitted index.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridSpec<T> {
    pub lo: Option<T>,
    pub hi: Option<T>,
    pub points: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn span(points: usize) -> Self {
        Self { lo: None, hi: None, points }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CdfCurve<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub beta_used: Coefficients<T>,
    /// Grid points dropped because the density estimate was zero there.
    pub missing: usize,
}

impl<T: Real> CdfCurve<T> {
    /// Two-column CSV with header `z,G_hat`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z,G_hat")?;
        for (z, g) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{z},{g}")?;
        }
        Ok(())
    }
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
pub fn isotonic<T: Real>(values: &[T]) -> Vec<T> {
    let mut blocks: Vec<(T, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let tot = na + nb;
            *blocks.last_mut().expect("two blocks present") =
                ((a * T::of_usize(na) + b * T::of_usize(nb)) / T::of_usize(tot), tot);
        }
    }
    blocks.into_iter().flat_map(|(v, c)| std::iter::repeat_n(v, c)).collect()
}

/// Kernel estimate of the link on a grid, clamped to `[0, 1]`.
pub fn estimate_cdf_curve<T: Real>(
    data: &Dataset<T>,
    beta: &Coefficients<T>,
    grid: &GridSpec<T>,
    cfg: &InferenceConfig<T>,
    monotone: bool,
) -> Result<CdfCurve<T>> {
    let f = fit(data, beta, cfg)?;
    let empty = CdfCurve { grid: Vec::new(), values: Vec::new(), beta_used: beta.clone(), missing: 0 };
    if grid.points == 0 {
        return Ok(empty);
    }
    let zmin = f.z.iter().copied().fold(T::infinity(), T::min);
    let zmax = f.z.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = grid.lo.unwrap_or(zmin);
    let hi = grid.hi.unwrap_or(zmax);
    if !(lo.is_finite() && hi.is_finite()) || (grid.points > 1 && !(hi > lo)) {
        return Err(Error::Usage(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let pts: Vec<T> = if grid.points == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / T::of_usize(grid.points - 1);
        (0..grid.points).map(|k| if k + 1 == grid.points { hi } else { lo + step * T::of_usize(k) }).collect()
    };
    let g = nw_full(&pts, &f.z, data.y(), f.h, &cfg.kernel, cfg.nw)?;
    let mut out = CdfCurve { missing: g.iter().filter(|v| v.is_none()).count(), ..empty };
    for (z, v) in pts.into_iter().zip(g) {
        if let Some(v) = v {
            out.grid.push(z);
            out.values.push(v.max(T::zero()).min(T::one()));
        }
    }
    if monotone {
        out.values = isotonic(&out.values);
    }
    Ok(out)
}
