use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Cauchy, ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::scalar::Real;

/// Nonzero head of the default coefficient vector; the rest is zero.
pub const DEFAULT_BETA_HEAD: [f64; 9] = [1.0, 1.0, 0.5, 2.0, 5.0, -0.5, -1.0, -2.0, -5.0];

/// How the published coefficient display maps onto the free coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaLayout {
    /// All nine listed values are free coefficients, then zeros.
    #[default]
    Full,
    /// The first listed value is the unit `x0` coefficient; the remaining
    /// eight are free coefficients, then zeros.
    DropLeading,
}

impl BetaLayout {
    pub fn beta_star(self, p: usize) -> Vec<f64> {
        let head: &[f64] = match self {
            BetaLayout::Full => &DEFAULT_BETA_HEAD,
            BetaLayout::DropLeading => &DEFAULT_BETA_HEAD[1..],
        };
        (0..p).map(|j| head.get(j).copied().unwrap_or(0.0)).collect()
    }
}

/// Distribution of the latent error `u`; the link is its CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorFamily {
    Cauchy,
    Chisq3,
    Normal,
    Logistic,
}

impl ErrorFamily {
    pub const ALL: [ErrorFamily; 4] = [Self::Cauchy, Self::Chisq3, Self::Normal, Self::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cauchy => "cauchy",
            Self::Chisq3 => "chisq3",
            Self::Normal => "normal",
            Self::Logistic => "logistic",
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Cauchy => Cauchy::new(0.0, 1.0).expect("valid").sample(rng),
            Self::Chisq3 => ChiSquared::new(3.0).expect("valid").sample(rng),
            Self::Normal => StandardNormal.sample(rng),
            Self::Logistic => {
                let v: f64 = rng.random_range(f64::EPSILON..1.0);
                (v / (1.0 - v)).ln()
            }
        }
    }

    /// Link `G(t) = P(u < t)`.
    pub fn cdf(self, t: f64) -> f64 {
        match self {
            Self::Cauchy => statrs::distribution::Cauchy::new(0.0, 1.0).expect("valid").cdf(t),
            Self::Chisq3 => statrs::distribution::ChiSquared::new(3.0).expect("valid").cdf(t.max(0.0)),
            Self::Normal => statrs::distribution::Normal::standard().cdf(t),
            Self::Logistic => 1.0 / (1.0 + (-t).exp()),
        }
    }

    /// Link derivative `G'(t)`.
    pub fn density(self, t: f64) -> f64 {
        match self {
            Self::Cauchy => statrs::distribution::Cauchy::new(0.0, 1.0).expect("valid").pdf(t),
            Self::Chisq3 if t <= 0.0 => 0.0,
            Self::Chisq3 => statrs::distribution::ChiSquared::new(3.0).expect("valid").pdf(t),
            Self::Normal => statrs::distribution::Normal::standard().pdf(t),
            Self::Logistic => {
                let g = self.cdf(t);
                g * (1.0 - g)
            }
        }
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown error family '{s}' (cauchy|chisq3|normal|logistic)")))
    }
}

/// Simulation design: `x0 ~ N(0,1)`, `x1 ~ Bernoulli(1/2)`, `x2 ~ Poisson(2)`,
/// `x_j ~ (chi2(1) - 1) / sqrt(2)` for `j >= 3`, and
/// `y = 1(x0 + x'beta* - u > 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub p: usize,
    pub error: ErrorFamily,
    pub beta_star: Vec<f64>,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(n: usize, p: usize, error: ErrorFamily, seed: u64) -> Self {
        Self { n, p, error, beta_star: BetaLayout::default().beta_star(p), seed }
    }

    pub fn with_beta(mut self, beta_star: Vec<f64>) -> Self {
        self.beta_star = beta_star;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::Usage(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p)));
        }
        if self.beta_star.len() != self.p || self.beta_star.iter().any(|b| !b.is_finite()) {
            return Err(Error::Usage(format!("beta_star must hold {} finite values", self.p)));
        }
        Ok(())
    }
}

fn draw_covariate<R: Rng + ?Sized>(j: usize, rng: &mut R) -> f64 {
    match j {
        1 => Bernoulli::new(0.5).expect("valid").sample(rng) as u8 as f64,
        2 => Poisson::new(2.0).expect("valid").sample(rng),
        _ => (ChiSquared::new(1.0).expect("valid").sample(rng) - 1.0) / std::f64::consts::SQRT_2,
    }
}

/// Draws a dataset and returns it with the true index values `x0 + x'beta*`.
pub fn generate_dataset<T: Real>(spec: &DgpSpec) -> Result<(Dataset<T>, Vec<T>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p) = (spec.n, spec.p);
    let mut x0 = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let mut zi = a;
        for j in 1..=p {
            let v = draw_covariate(j, &mut rng);
            zi += v * spec.beta_star[j - 1];
            x.push(T::of(v));
        }
        let u = spec.error.sample(&mut rng);
        x0.push(T::of(a));
        y.push(if zi - u > 0.0 { T::one() } else { T::zero() });
        z.push(T::of(zi));
    }
    Ok((Dataset::new(x0, x, y, p)?, z))
}
