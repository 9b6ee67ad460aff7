//! Data representation, single-index computation and covariate trimming.
//!
//! The model is `P(y = 1 | x0, x) = G(x0 + x'beta)` with the coefficient on
//! `x0` normalized to one. Only the `p` free coefficients are ever stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Immutable design: normalized covariate `x0`, free covariates `x` (row-major
/// `n x p`) and binary outcomes `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x0: Vec<T>,
    x: Vec<T>,
    y: Vec<T>,
    n: usize,
    p: usize,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset from a row-major covariate buffer.
    pub fn new(x0: Vec<T>, x: Vec<T>, y: Vec<T>, p: usize) -> Result<Self> {
        let n = x0.len();
        if n < 2 {
            return Err(Error::Usage(format!("dataset needs n >= 2, got {n}")));
        }
        if p < 1 {
            return Err(Error::Usage("dataset needs p >= 1 free covariates".into()));
        }
        if x.len() != n * p {
            return Err(Error::Usage(format!(
                "covariate buffer has {} entries, expected n*p = {}",
                x.len(),
                n * p
            )));
        }
        if y.len() != n {
            return Err(Error::Usage(format!("y has length {}, expected {n}", y.len())));
        }
        if let Some(i) = y.iter().position(|&v| v != T::zero() && v != T::one()) {
            return Err(Error::Usage(format!("y[{i}] = {} is not binary", y[i])));
        }
        if x0.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Usage("covariates contain non-finite values".into()));
        }
        Ok(Self { x0, x, y, n, p })
    }

    /// Builds a dataset from per-observation covariate rows.
    pub fn from_rows(x0: Vec<T>, rows: &[Vec<T>], y: Vec<T>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Usage("covariate rows have unequal lengths".into()));
        }
        let x = rows.iter().flatten().copied().collect();
        Self::new(x0, x, y, p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// Row-major `n x p` covariate buffer.
    pub fn x(&self) -> &[T] {
        &self.x
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Column `j` of the free covariates, copied out.
    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.x[i * self.p + j]).collect()
    }

    /// Index value `x0_i + <x_i, beta>` for one observation.
    ///
    /// Accumulation starts from `x0_i` and adds `x_ij * beta_j` in ascending
    /// `j`. Every index computation in the crate goes through here, so the
    /// full-sample and subsample paths agree bit for bit.
    #[inline]
    pub fn index_at(&self, i: usize, beta: &[T]) -> T {
        let mut z = self.x0[i];
        for (&xij, &bj) in self.row(i).iter().zip(beta) {
            z += xij * bj;
        }
        z
    }
}

/// The `p` free coefficients; the unit coefficient on `x0` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients<T> {
    pub beta: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    pub fn new(beta: Vec<T>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Usage("coefficients must be finite".into()));
        }
        Ok(Self { beta })
    }

    pub fn zeros(p: usize) -> Self {
        Self { beta: vec![T::zero(); p] }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.beta
    }

    pub fn norm(&self) -> T {
        self.beta.iter().map(|&b| b * b).sum::<T>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TrimmingSpec<T> {
    /// Every observation contributes.
    None,
    /// Keep observations whose every covariate satisfies `|x| <= 1 - phi`.
    Box { phi: T },
    /// Keep observations whose every covariate lies inside its column's
    /// empirical `[lo, hi]` quantile band.
    Quantile { lo: T, hi: T },
}

impl<T> Default for TrimmingSpec<T> {
    fn default() -> Self {
        TrimmingSpec::None
    }
}

impl<T: Real> TrimmingSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrimmingSpec::None => Ok(()),
            TrimmingSpec::Box { phi } => {
                if phi >= T::zero() && phi < T::one() {
                    Ok(())
                } else {
                    Err(Error::Usage(format!("box trimming needs 0 <= phi < 1, got {phi}")))
                }
            }
            TrimmingSpec::Quantile { lo, hi } => {
                if lo >= T::zero() && lo < hi && hi <= T::one() {
                    Ok(())
                } else {
                    Err(Error::Usage(format!(
                        "quantile trimming needs 0 <= lo < hi <= 1, got [{lo}, {hi}]"
                    )))
                }
            }
        }
    }
}

/// Index values `z_i = x0_i + <x_i, beta>` and the coefficients that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexValues<T> {
    pub z: Vec<T>,
    pub beta_used: Coefficients<T>,
}

pub fn compute_index<T: Real>(dataset: &Dataset<T>, beta: &Coefficients<T>) -> Result<IndexValues<T>> {
    if beta.len() != dataset.p() {
        return Err(Error::Usage(format!(
            "coefficient length {} does not match p = {}",
            beta.len(),
            dataset.p()
        )));
    }
    let z = (0..dataset.n()).map(|i| dataset.index_at(i, &beta.beta)).collect();
    Ok(IndexValues { z, beta_used: beta.clone() })
}

/// Empirical quantile with linear interpolation between order statistics
/// (`(m - 1) * q` positioning). `sorted` must be ascending and non-empty.
pub(crate) fn quantile_sorted<T: Real>(sorted: &[T], q: T) -> T {
    let m = sorted.len();
    let pos = q * T::of_usize(m - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(m - 1);
    let hi = (lo + 1).min(m - 1);
    let frac = pos - T::of_usize(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-observation 0/1 weights selecting the observations that enter the
/// gradient (`X_i^phi = mask_i * x_i`).
pub fn trimming_mask<T: Real>(dataset: &Dataset<T>, spec: &TrimmingSpec<T>) -> Result<Vec<T>> {
    spec.validate()?;
    let n = dataset.n();
    let p = dataset.p();
    let mask = match *spec {
        TrimmingSpec::None => vec![T::one(); n],
        TrimmingSpec::Box { phi } => {
            let bound = T::one() - phi;
            (0..n)
                .map(|i| {
                    let inside = dataset.x0()[i].abs() <= bound
                        && dataset.row(i).iter().all(|v| v.abs() <= bound);
                    if inside { T::one() } else { T::zero() }
                })
                .collect()
        }
        TrimmingSpec::Quantile { lo, hi } => {
            let band = |mut col: Vec<T>| {
                col.sort_by(|a, b| a.partial_cmp(b).expect("finite covariates"));
                (quantile_sorted(&col, lo), quantile_sorted(&col, hi))
            };
            let x0_band = band(dataset.x0().to_vec());
            let bands: Vec<(T, T)> = (0..p).map(|j| band(dataset.column(j))).collect();
            (0..n)
                .map(|i| {
                    let x0 = dataset.x0()[i];
                    let inside = x0 >= x0_band.0
                        && x0 <= x0_band.1
                        && dataset
                            .row(i)
                            .iter()
                            .zip(&bands)
                            .all(|(&v, &(a, b))| v >= a && v <= b);
                    if inside { T::one() } else { T::zero() }
                })
                .collect()
        }
    };
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(x0: Vec<f64>, rows: &[Vec<f64>]) -> Dataset<f64> {
        let n = x0.len();
        let y = (0..n).map(|i| (i % 2) as f64).collect();
        Dataset::from_rows(x0, rows, y).unwrap()
    }

    #[test]
    fn index_examples() {
        let d = ds(vec![1.0, 2.0], &[vec![0.0], vec![0.0]]);
        let z = compute_index(&d, &Coefficients::new(vec![5.0]).unwrap()).unwrap();
        assert_eq!(z.z, vec![1.0, 2.0]);

        let d = ds(vec![0.0, 0.0], &[vec![1.0], vec![2.0]]);
        let z = compute_index(&d, &Coefficients::new(vec![3.0]).unwrap()).unwrap();
        assert_eq!(z.z, vec![3.0, 6.0]);

        // n >= 2 is required, so the single-row example is checked on row 0
        let d = ds(vec![1.0, 0.0], &[vec![2.0, 3.0], vec![0.0, 0.0]]);
        let z = compute_index(&d, &Coefficients::new(vec![0.5, -1.0]).unwrap()).unwrap();
        assert_eq!(z.z[0], -1.0);
    }

    #[test]
    fn index_dimension_mismatch() {
        let d = ds(vec![1.0, 2.0], &[vec![0.0], vec![0.0]]);
        let err = compute_index(&d, &Coefficients::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 2.0], 1).is_err());
        assert!(Dataset::new(vec![0.0], vec![0.0], vec![0.0], 1).is_err());
        assert!(Dataset::new(vec![0.0, f64::NAN], vec![0.0, 0.0], vec![0.0, 1.0], 1).is_err());
        assert!(Dataset::new(vec![0.0, 1.0], vec![], vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn mask_none_and_box() {
        let d = ds(vec![0.4, 0.9], &[vec![0.0], vec![0.0]]);
        assert_eq!(trimming_mask(&d, &TrimmingSpec::None).unwrap(), vec![1.0, 1.0]);
        let m = trimming_mask(&d, &TrimmingSpec::Box { phi: 0.5 }).unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
        assert!(trimming_mask(&d, &TrimmingSpec::Box { phi: 1.0 }).is_err());
        assert!(trimming_mask(&d, &TrimmingSpec::Quantile { lo: 0.5, hi: 0.5 }).is_err());
    }

    #[test]
    fn mask_quantile_on_grid() {
        let x0: Vec<f64> = (1..=10).map(f64::from).collect();
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0]).collect();
        let d = ds(x0, &rows);
        let m = trimming_mask(&d, &TrimmingSpec::Quantile { lo: 0.1, hi: 0.9 }).unwrap();
        assert_eq!(m.iter().filter(|&&v| v == 1.0).count(), 8);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[9], 0.0);
    }

    #[test]
    fn box_mask_with_tiny_phi_drops_only_outside_unit_box() {
        let d = ds(vec![0.99, 1.01, -0.5], &[vec![-0.2], vec![0.0], vec![1.5]]);
        let m = trimming_mask(&d, &TrimmingSpec::Box { phi: 1e-9 }).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn index_is_affine_in_beta(
            rows in prop::collection::vec(prop::collection::vec(-8i32..8, 3), 2..12),
            b1 in prop::collection::vec(-5i32..5, 3),
            b2 in prop::collection::vec(-5i32..5, 3),
            a in -3i32..3, b in -3i32..3,
        ) {
            let n = rows.len();
            let x0: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let d = ds(x0.clone(), &rows);
            let to = |v: &[i32]| Coefficients::new(v.iter().map(|&x| x as f64).collect()).unwrap();
            let (a, b) = (a as f64, b as f64);
            let mixed = Coefficients::new(
                b1.iter().zip(&b2).map(|(&u, &v)| a * u as f64 + b * v as f64).collect(),
            ).unwrap();
            let lhs = compute_index(&d, &mixed).unwrap().z;
            let z1 = compute_index(&d, &to(&b1)).unwrap().z;
            let z2 = compute_index(&d, &to(&b2)).unwrap().z;
            for i in 0..n {
                let rhs = a * z1[i] + b * z2[i] + (1.0 - a - b) * x0[i];
                prop_assert_eq!(lhs[i], rhs);
            }
        }

        #[test]
        fn masks_are_idempotent(vals in prop::collection::vec(-2.0f64..2.0, 4..40), phi in 0.0f64..0.9) {
            let n = vals.len();
            let rows: Vec<Vec<f64>> = vals.iter().rev().map(|&v| vec![v]).collect();
            let d = ds(vals.clone(), &rows);
            for spec in [TrimmingSpec::Box { phi }, TrimmingSpec::Quantile { lo: 0.05, hi: 0.95 }] {
                let m1 = trimming_mask(&d, &spec).unwrap();
                let m2 = trimming_mask(&d, &spec).unwrap();
                prop_assert_eq!(m1.len(), n);
                prop_assert_eq!(m1, m2);
            }
        }
    }
}
