//! Compactly supported polynomial kernels of order 2, 4 and 6, exact moment
//! verification, and the data-driven bandwidth rule.
//!
//! Every kernel here has the form `K(u) = q(u^2) * 1(|u| <= 1)` for a
//! polynomial `q` with rational coefficients. Keeping the coefficients exact
//! lets [`verify_moments`] integrate `u^v K(u)` over `[-1, 1]` in closed form
//! with no quadrature error.

use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A symmetric kernel supported on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    order: u32,
    /// Exact coefficients of `q` in powers of `t = u^2`, ascending.
    exact: Vec<Rational64>,
    /// `exact` rounded to `T`.
    coeffs: Vec<T>,
    /// Coefficients of `K'(u) / u` in powers of `t`, ascending.
    deriv_coeffs: Vec<T>,
}

fn rat(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn poly_mul(a: &[Rational64], b: &[Rational64]) -> Vec<Rational64> {
    let mut out = vec![Rational64::zero(); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn to_real<T: Real>(r: &Rational64) -> T {
    T::of(*r.numer() as f64 / *r.denom() as f64)
}

impl<T: Real> KernelSpec<T> {
    /// Builds a kernel of declared `order` from exact coefficients of `q` in
    /// powers of `u^2`. No moment conditions are enforced; use
    /// [`verify_moments`] to check them.
    pub fn from_even_coeffs(order: u32, exact: Vec<Rational64>) -> Result<Self> {
        if exact.is_empty() {
            return Err(Error::Usage("kernel polynomial has no coefficients".into()));
        }
        let coeffs = exact.iter().map(to_real).collect();
        let deriv_coeffs = exact
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| to_real(&(*c * Rational64::from_integer(2 * k as i64))))
            .collect();
        Ok(Self { order, exact, coeffs, deriv_coeffs })
    }

    /// `K(u) = lead (1 - u^2) rest(u^2)` on `|u| <= 1`, with `rest` given by
    /// its coefficients in `t = u^2`, lowest degree first.
    pub fn from_factors(order: u32, lead: Rational64, rest: &[Rational64]) -> Result<Self> {
        let q = poly_mul(&[rat(1, 1), rat(-1, 1)], rest).into_iter().map(|c| c * lead).collect();
        Self::from_even_coeffs(order, q)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Exact coefficients of `q` in powers of `u^2`.
    pub fn exact_coeffs(&self) -> &[Rational64] {
        &self.exact
    }

    #[inline]
    pub fn eval(&self, u: T) -> T {
        if u.abs() > T::one() {
            return T::zero();
        }
        horner(&self.coeffs, u * u)
    }

    /// `K'(u)`. At `|u| = 1` this is the one-sided interior limit.
    #[inline]
    pub fn deriv(&self, u: T) -> T {
        if u.abs() > T::one() {
            return T::zero();
        }
        u * horner(&self.deriv_coeffs, u * u)
    }

    /// `K(u)` and `K'(u)` together.
    #[inline]
    pub fn eval_with_deriv(&self, u: T) -> (T, T) {
        if u.abs() > T::one() {
            return (T::zero(), T::zero());
        }
        let t = u * u;
        (horner(&self.coeffs, t), u * horner(&self.deriv_coeffs, t))
    }
}

#[inline]
fn horner<T: Real>(c: &[T], t: T) -> T {
    let mut acc = T::zero();
    for &ck in c.iter().rev() {
        acc = acc * t + ck;
    }
    acc
}

/// Epanechnikov-family kernel of order 2, 4 or 6:
///
/// * 2: `(3/4)(1 - u^2)`
/// * 4: `(15/32)(1 - u^2)(3 - 7u^2)`
/// * 6: `(525/256)(1 - u^2)(1 - 6u^2 + (33/5)u^4)`
pub fn make_kernel<T: Real>(order: u32) -> Result<KernelSpec<T>> {
    let (lead, rest): (Rational64, Vec<Rational64>) = match order {
        2 => (rat(3, 4), vec![rat(1, 1)]),
        4 => (rat(15, 32), vec![rat(3, 1), rat(-7, 1)]),
        6 => (rat(525, 256), vec![rat(1, 1), rat(-6, 1), rat(33, 5)]),
        _ => {
            return Err(Error::Usage(format!(
                "unsupported kernel order {order}; expected 2, 4 or 6"
            )))
        }
    };
    KernelSpec::from_factors(order, lead, &rest)
}

/// One moment `int_{-1}^{1} u^v K(u) du`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub v: u32,
    /// Exact value as `numer/denom`.
    pub exact: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: u32,
    pub tol: f64,
    /// Moments `0..=order`.
    pub moments: Vec<Moment>,
    pub integrates_to_one: bool,
    pub vanishing_moments: bool,
    pub leading_moment_nonzero: bool,
    pub pass: bool,
}

impl MomentReport {
    pub fn moment(&self, v: u32) -> f64 {
        self.moments[v as usize].value
    }
}

/// Exact `int_{-1}^{1} u^v q(u^2) du`.
fn exact_moment(coeffs: &[Rational64], v: u32) -> Rational64 {
    if v % 2 == 1 {
        return Rational64::zero();
    }
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * rat(2, i64::from(v) + 2 * k as i64 + 1))
        .fold(Rational64::zero(), |a, b| a + b)
}

/// Integrates `u^v K(u)` exactly for `v = 0..=order` and checks
/// `int K = 1`, `int u^v K = 0` for `1 <= v < order`, `int u^order K != 0`.
pub fn verify_moments<T: Real>(spec: &KernelSpec<T>, tol: f64) -> Result<MomentReport> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let exact: Vec<Rational64> = (0..=spec.order).map(|v| exact_moment(&spec.exact, v)).collect();
    let moments = exact
        .iter()
        .enumerate()
        .map(|(v, m)| Moment {
            v: v as u32,
            exact: format!("{}/{}", m.numer(), m.denom()),
            value: m.to_f64().unwrap_or(f64::NAN),
        })
        .collect::<Vec<_>>();
    let integrates_to_one = (exact[0] - Rational64::one()).abs().to_f64().unwrap_or(f64::INFINITY) < tol;
    let d = spec.order as usize;
    let vanishing_moments = exact[1..d].iter().all(|m| m.abs().to_f64().unwrap_or(f64::INFINITY) < tol);
    let leading_moment_nonzero = !exact[d].is_zero();
    Ok(MomentReport {
        order: spec.order,
        tol,
        moments,
        integrates_to_one,
        vanishing_moments,
        leading_moment_nonzero,
        pass: integrates_to_one && vanishing_moments && leading_moment_nonzero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthScale<T> {
    /// Scale by the sample standard deviation of the current index values.
    IndexStd,
    /// Use this bandwidth as is.
    Fixed(T),
}

/// `h = std(z) * n^exponent`, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRule<T> {
    pub exponent: T,
    pub scale: BandwidthScale<T>,
}

impl<T: Real> Default for BandwidthRule<T> {
    fn default() -> Self {
        Self { exponent: T::of(-0.1), scale: BandwidthScale::IndexStd }
    }
}

impl<T: Real> BandwidthRule<T> {
    pub fn fixed(h: T) -> Self {
        Self { scale: BandwidthScale::Fixed(h), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent < T::zero()) {
            return Err(Error::Usage(format!(
                "bandwidth exponent must be negative, got {}",
                self.exponent
            )));
        }
        if let BandwidthScale::Fixed(h) = self.scale {
            if !(h > T::zero()) || !h.is_finite() {
                return Err(Error::Usage(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Sample standard deviation with the `m - 1` denominator.
pub fn sample_std<T: Real>(z: &[T]) -> T {
    let m = z.len();
    if m < 2 {
        return T::zero();
    }
    let mean = z.iter().copied().sum::<T>() / T::of_usize(m);
    let ss: T = z.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / T::of_usize(m - 1)).sqrt()
}

/// Bandwidth for index values `z`, where `n` is the full sample size that
/// drives the rate (a subsample's index values may be passed as `z`).
pub fn bandwidth<T: Real>(rule: &BandwidthRule<T>, z: &[T], n: usize) -> Result<T> {
    rule.validate()?;
    match rule.scale {
        BandwidthScale::Fixed(h) => Ok(h),
        BandwidthScale::IndexStd => {
            if n < 2 {
                return Err(Error::Usage(format!("bandwidth needs n >= 2, got {n}")));
            }
            let sd = sample_std(z);
            if !(sd > T::zero()) || !sd.is_finite() {
                return Err(Error::DegenerateData(
                    "index values have zero variance; bandwidth undefined".into(),
                ));
            }
            let h = sd * T::of(n as f64).powf(rule.exponent);
            Ok(h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(order: u32) -> KernelSpec<f64> {
        make_kernel(order).unwrap()
    }

    fn printed_sixth_order() -> KernelSpec<f64> {
        // (525/256)(1 - u^2)(1 - 6u^2 - (33/5)u^4), sign as typeset in print
        let q = poly_mul(&[rat(1, 1), rat(-1, 1)], &[rat(1, 1), rat(-6, 1), rat(-33, 5)]);
        KernelSpec::from_even_coeffs(6, q.into_iter().map(|c| c * rat(525, 256)).collect()).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert!((k(6).eval(0.0) - 525.0 / 256.0).abs() < 1e-15);
        assert!((k(6).eval(0.0) - 2.050781).abs() < 1e-6);
        assert_eq!(k(6).eval(1.0), 0.0);
        assert_eq!(k(6).eval(-1.0), 0.0);
        assert_eq!(k(6).eval(1.5), 0.0);
        assert_eq!(k(2).eval(0.0), 0.75);
        assert_eq!(k(6).eval(-0.3), k(6).eval(0.3));
        let expected = (525.0 / 256.0) * 0.75 * (1.0 - 1.5 + 0.4125);
        assert!((k(6).eval(0.5) - expected).abs() < 1e-14);
        assert!((k(6).eval(0.5) + 0.134583).abs() < 1e-6);
    }

    #[test]
    fn order_four_coefficients() {
        // (15/32)(1 - t)(3 - 7t) = (15/32)(3 - 10t + 7t^2)
        let c = k(4);
        assert_eq!(c.exact_coeffs(), &[rat(45, 32), rat(-150, 32), rat(105, 32)]);
    }

    #[test]
    fn order_four_solves_moment_system() {
        // Family (1 - u^2)(a + b u^2): int K = 1 and int u^2 K = 0 form a 2x2
        // rational system. int (1-t)(a+bt) = a*4/3 + b*4/15,
        // int u^2 (1-t)(a+bt) = a*4/15 + b*4/35.
        let (a11, a12, a21, a22) = (rat(4, 3), rat(4, 15), rat(4, 15), rat(4, 35));
        let det = a11 * a22 - a12 * a21;
        let a = a22 / det;
        let b = -a21 / det;
        assert_eq!(a, rat(45, 32));
        assert_eq!(b, rat(-105, 32));
        let c = k(4);
        // (1 - t)(a + bt) = a + (b - a) t - b t^2
        assert_eq!(c.exact_coeffs(), &[a, b - a, -b]);
    }

    #[test]
    fn derivative_values() {
        for order in [2, 4, 6] {
            assert_eq!(k(order).deriv(0.0), 0.0);
        }
        assert!((k(2).deriv(0.5) + 0.75).abs() < 1e-15);
        let eps = 1e-5;
        let spec = k(6);
        let fd = (spec.eval(0.3 + eps) - spec.eval(0.3 - eps)) / (2.0 * eps);
        assert!((spec.deriv(0.3) - fd).abs() < 1e-6);
        assert_eq!(spec.deriv(1.2), 0.0);
        // interior one-sided limit at the boundary
        assert!((spec.deriv(1.0) - spec.deriv(1.0 - 1e-12)).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_differences_on_grid() {
        let eps = 1e-5;
        for order in [2, 4, 6] {
            let spec = k(order);
            for i in 0..101 {
                let u = -0.99 + 1.98 * f64::from(i) / 100.0;
                let fd = (spec.eval(u + eps) - spec.eval(u - eps)) / (2.0 * eps);
                assert!((spec.deriv(u) - fd).abs() < 1e-6, "order {order} u {u}");
                assert_eq!(spec.eval(-u), spec.eval(u));
                assert_eq!(spec.deriv(-u), -spec.deriv(u));
            }
        }
    }

    #[test]
    fn moments_order_two() {
        let r = verify_moments(&k(2), 1e-8).unwrap();
        assert_eq!(r.moment(0), 1.0);
        assert_eq!(r.moment(1), 0.0);
        assert!((r.moment(2) - 0.2).abs() < 1e-15);
        assert!(r.pass);
    }

    #[test]
    fn moments_order_six() {
        let r = verify_moments(&k(6), 1e-8).unwrap();
        assert!(r.pass);
        for v in 1..=5 {
            assert!(r.moment(v).abs() < 1e-12);
        }
        assert!((r.moment(6) - 0.011655).abs() < 1e-6);
        assert!(r.moment(6).abs() > 1e-3);
    }

    #[test]
    fn printed_sign_variant_fails() {
        let r = verify_moments(&printed_sixth_order(), 1e-8).unwrap();
        assert!(!r.integrates_to_one);
        assert!(!r.pass);
        assert!((r.moment(0) + 2.0937).abs() < 1e-4);
    }

    #[test]
    fn unsupported_order_and_bad_tol() {
        assert!(matches!(make_kernel::<f64>(3), Err(Error::Usage(_))));
        assert!(matches!(make_kernel::<f64>(8), Err(Error::Usage(_))));
        assert!(verify_moments(&k(2), 0.0).is_err());
    }

    #[test]
    fn f32_kernel_agrees() {
        let k32: KernelSpec<f32> = make_kernel(6).unwrap();
        assert!((f64::from(k32.eval(0.5)) - k(6).eval(0.5)).abs() < 1e-6);
    }

    #[test]
    fn bandwidth_examples() {
        let rule = BandwidthRule::<f64>::default();
        let z = [-1.0, 1.0]; // std sqrt(2)
        let h = bandwidth(&rule, &z, 10_000_000_000).unwrap();
        assert!((h - 2f64.sqrt() * 0.1).abs() < 1e-12);
        let z = [0.0, 1.0, 2.0]; // std 1
        let h = bandwidth(&rule, &z, 10_000_000_000).unwrap();
        assert!((h - 0.1).abs() < 1e-12);
        let h = bandwidth(&rule, &[0.0, 2.0], 1024).unwrap();
        assert!((h - 0.70711).abs() < 1e-5);
        let fixed = BandwidthRule::fixed(0.25);
        assert_eq!(bandwidth(&fixed, &[3.0, 3.0], 5).unwrap(), 0.25);
        assert!(matches!(bandwidth(&rule, &[3.0, 3.0], 5), Err(Error::DegenerateData(_))));
        let bad = BandwidthRule { exponent: 0.1, scale: BandwidthScale::IndexStd };
        assert!(bandwidth(&bad, &[0.0, 1.0], 5).is_err());
    }

    #[test]
    fn bandwidth_scale_equivariant() {
        let rule = BandwidthRule::<f64>::default();
        let z: Vec<f64> = (0..50).map(|i| (f64::from(i) * 0.37).sin()).collect();
        let zc: Vec<f64> = z.iter().map(|v| v * 3.5).collect();
        let h = bandwidth(&rule, &z, 50).unwrap();
        let hc = bandwidth(&rule, &zc, 50).unwrap();
        assert!((hc - 3.5 * h).abs() < 1e-12);
    }
}
