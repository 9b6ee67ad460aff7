//! Logistic-regression starting values.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{Coefficients, Dataset};
use crate::scalar::Real;

const MAX_NEWTON: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const MIN_X0_COEF: f64 = 1e-8;

/// Unnormalized maximum-likelihood fit on `[1, x0, x]`.
#[derive(Debug, Clone)]
pub struct LogitFit<T> {
    pub intercept: T,
    pub x0_coef: T,
    pub coefs: Vec<T>,
    pub iterations: usize,
}

fn log1p_exp<T: Real>(t: T) -> T {
    // log(1 + e^t) without overflow
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

fn sigmoid<T: Real>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

fn design_row<T: Real>(data: &Dataset<T>, i: usize, out: &mut [T]) {
    out[0] = T::one();
    out[1] = data.x0()[i];
    out[2..].copy_from_slice(data.row(i));
}

fn linear<T: Real>(row: &[T], theta: &[T]) -> T {
    row.iter().zip(theta).map(|(&a, &b)| a * b).sum()
}

fn mean_loglik<T: Real>(data: &Dataset<T>, theta: &[T], row: &mut [T]) -> T {
    let mut ll = T::zero();
    for i in 0..data.n() {
        design_row(data, i, row);
        let eta = linear(row, theta);
        ll += data.y()[i] * eta - log1p_exp(eta);
    }
    ll / T::of_usize(data.n())
}

/// Damped Newton fit of `P(y = 1) = sigma(a + b x0 + x'c)`.
pub fn logit_fit<T: Real>(data: &Dataset<T>) -> Result<LogitFit<T>> {
    let n = data.n();
    let ones = data.y().iter().filter(|&&v| v == T::one()).count();
    if ones == 0 || ones == n {
        return Err(Error::Initialization("outcome is constant; logistic fit undefined".into()));
    }
    let d = data.p() + 2;
    let nt = T::of_usize(n);
    let mut theta = vec![T::zero(); d];
    let mut row = vec![T::zero(); d];
    let mut ll = mean_loglik(data, &theta, &mut row);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..MAX_NEWTON {
        iterations = it;
        let mut grad = vec![T::zero(); d];
        let mut hess = Matrix::zeros(d, d);
        for i in 0..n {
            design_row(data, i, &mut row);
            let mu = sigmoid(linear(&row, &theta));
            let r = data.y()[i] - mu;
            let w = mu * (T::one() - mu);
            for a in 0..d {
                grad[a] += r * row[a];
                let wa = w * row[a];
                for b in a..d {
                    hess[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..d {
            grad[a] /= nt;
            for b in a..d {
                let v = hess[(a, b)] / nt;
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        let gnorm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
        if gnorm.as_f64() <= GRAD_TOL {
            converged = true;
            break;
        }
        let step = Lu::factor(&hess)
            .map_err(|e| Error::Initialization(format!("logistic information matrix: {e}")))?
            .solve_vec(&grad);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a + t * s).collect();
            let cand_ll = mean_loglik(data, &cand, &mut row);
            if cand_ll >= ll {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= T::of(0.5);
        }
        if !accepted {
            // no ascent possible at machine precision
            converged = gnorm.as_f64() <= GRAD_TOL.sqrt();
            break;
        }
    }
    if !converged {
        return Err(Error::Initialization(format!(
            "logistic fit did not converge in {MAX_NEWTON} Newton steps"
        )));
    }
    let separated = (0..n).all(|i| {
        design_row(data, i, &mut row);
        (linear(&row, &theta) > T::zero()) == (data.y()[i] == T::one())
    });
    if separated {
        return Err(Error::Initialization("outcome is perfectly separated by the covariates".into()));
    }
    Ok(LogitFit { intercept: theta[0], x0_coef: theta[1], coefs: theta[2..].to_vec(), iterations })
}

/// Starting coefficients: the logistic slopes on `x` divided by the slope on
/// `x0`, matching the unit normalization of the index.
pub fn logit_init<T: Real>(data: &Dataset<T>) -> Result<Coefficients<T>> {
    let fit = logit_fit(data)?;
    if fit.x0_coef.as_f64() <= MIN_X0_COEF {
        return Err(Error::Normalization(fit.x0_coef.as_f64()));
    }
    Coefficients::new(fit.coefs.iter().map(|&c| c / fit.x0_coef).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_dataset, DgpSpec, ErrorFamily};

    #[test]
    fn recovers_logistic_truth() {
        let spec = DgpSpec::new(20_000, 3, ErrorFamily::Logistic, 5);
        let (d, _) = generate_dataset::<f64>(&spec).unwrap();
        let b = logit_init(&d).unwrap();
        for (est, truth) in b.beta.iter().zip(&spec.beta_star) {
            assert!((est - truth).abs() < 0.15, "{est} vs {truth}");
        }
    }

    #[test]
    fn constant_outcome_rejected() {
        let d = Dataset::from_rows(vec![0.1, 0.2, 0.3], &[vec![1.0], vec![2.0], vec![0.0]], vec![1.0; 3])
            .unwrap();
        assert!(matches!(logit_init(&d), Err(Error::Initialization(_))));
    }

    #[test]
    fn separated_outcome_rejected() {
        let x0 = vec![-2.0, -1.0, 1.0, 2.0];
        let rows = vec![vec![0.3], vec![-0.1], vec![0.2], vec![0.0]];
        let d = Dataset::from_rows(x0, &rows, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(logit_init(&d), Err(Error::Initialization(_))));
    }

    #[test]
    fn negative_x0_slope_is_a_normalization_error() {
        // y depends negatively on x0 and not on x
        let mut x0 = Vec::new();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let t = (i as f64 / 399.0) * 4.0 - 2.0;
            x0.push(t);
            rows.push(vec![((i * 7) % 11) as f64 / 11.0]);
            let p = 1.0 / (1.0 + t.exp());
            y.push(if ((i * 37) % 100) as f64 / 100.0 < p { 1.0 } else { 0.0 });
        }
        let d = Dataset::from_rows(x0, &rows, y).unwrap();
        assert!(matches!(logit_init(&d), Err(Error::Normalization(_))));
    }

    #[test]
    fn stable_helpers() {
        assert!((log1p_exp(800.0f64) - 800.0).abs() < 1e-12);
        assert!(log1p_exp(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
    }
}
