use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindex::inference::known_link_covariance;
use mindex::sim::{generate_dataset, run_monte_carlo_with, DgpSpec, ErrorFamily, ReplicationOutcome};
use mindex::{
    bgd_step_known_g, confidence_intervals, estimate_lambda, estimate_sigma_xi, Coefficients, Dataset,
    InferenceConfig, IterationState,
};

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule on `[-10, 10]`.
fn quad(f: impl Fn(f64) -> f64) -> f64 {
    let m = 4000;
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `x0 ~ N(0, 1)`, one Bernoulli(1/2) covariate, logistic link.
fn bernoulli_design(n: usize, beta: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.sample(rand_distr::StandardNormal);
        let b = f64::from(rng.random_bool(0.5));
        x0.push(a);
        x.push(b);
        y.push(f64::from(rng.random_bool(logistic(a + beta * b))));
    }
    Dataset::new(x0, x, y, 1).unwrap()
}

#[test]
fn lambda_matches_quadrature_for_a_binary_covariate() {
    let beta = 1.0;
    let d = bernoulli_design(100_000, beta, 21);
    let est = estimate_lambda(&d, &Coefficients::new(vec![beta]).unwrap(), &InferenceConfig::default()).unwrap();
    // P(x1 = 1 | z) for z = x0 + beta x1.
    let pi = |z: f64| phi(z - beta) / (phi(z - beta) + phi(z));
    let dlink = |t: f64| logistic(t) * (1.0 - logistic(t));
    let truth = 0.5 * quad(|a| phi(a) * dlink(a + beta) * (1.0 - pi(a + beta)));
    let got = est[(0, 0)];
    assert!((got - truth).abs() < 0.15 * truth, "lambda {got} vs {truth}");
}

#[test]
fn score_variance_factorizes_without_covariate_effect() {
    let d = bernoulli_design(100_000, 0.0, 22);
    let est = estimate_sigma_xi(&d, &Coefficients::new(vec![0.0]).unwrap(), &InferenceConfig::default()).unwrap();
    let truth = 0.25 * quad(|a| phi(a) * logistic(a) * (1.0 - logistic(a)));
    let got = est[(0, 0)];
    assert!((got - truth).abs() < 0.10 * truth, "sigma {got} vs {truth}");
}

#[test]
fn known_link_intervals_have_nominal_coverage() {
    let dgp = DgpSpec::new(5000, 3, ErrorFamily::Logistic, 23);
    let link = logistic;
    let dlink = |t: f64| logistic(t) * (1.0 - logistic(t));
    let report = run_monte_carlo_with(&dgp, 200, |spec, _| {
        let (d, _) = generate_dataset::<f64>(spec)?;
        let mut s = IterationState::new(Coefficients::new(spec.beta_star.clone())?, 0, 0);
        for _ in 0..1000 {
            bgd_step_known_g(&mut s, &d, link, 2.0)?;
        }
        let cov = known_link_covariance(&d, &s.beta, link, dlink)?;
        Ok(ReplicationOutcome { beta: s.beta.beta, se: Some(cov.se), identity_residual: None, seconds: 0.0 })
    })
    .unwrap();
    assert_eq!(report.failures, 0);
    for c in &report.coverage {
        let c = c.unwrap();
        assert!((0.90..=0.99).contains(&c), "coverage {:?}", report.coverage);
    }
}

#[test]
fn intervals_are_symmetric_and_widen_with_level() {
    let d = bernoulli_design(5000, 1.0, 24);
    let beta = Coefficients::new(vec![1.0]).unwrap();
    let cov = known_link_covariance(&d, &beta, logistic, |t| logistic(t) * (1.0 - logistic(t))).unwrap();
    let a = confidence_intervals(&beta, &cov, 0.90).unwrap()[0];
    let b = confidence_intervals(&beta, &cov, 0.99).unwrap()[0];
    assert!(((a.0 + a.1) / 2.0 - 1.0).abs() < 1e-12);
    assert!(b.0 < a.0 && b.1 > a.1);
    assert!(confidence_intervals(&beta, &cov, 1.0).is_err());
}
