//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the libtest harness so the
//! lines are always visible; criteria run one after another, which keeps the
//! timing measurements free of interference.

use std::process::ExitCode;
use std::time::Instant;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindex::kernel::KernelSpec;
use mindex::nw::{naive_eval, nw_components};
use mindex::sim::{
    generate_dataset, identity_residual, run_bench, run_monte_carlo, Algorithm, BenchOptions, DgpSpec,
    ErrorFamily, McReport,
};
use mindex::{
    bgd_step_known_g, compute_index, covariance, estimate_cdf_curve, logit_init, make_kernel, run_akmbgd,
    verify_moments, Coefficients, Estimator, GdConfig, GridSpec, InferenceConfig, IterationState, NwOptions,
    NwPath, RunOptions,
};

/// Reference RMSE of b1..b9 for the normal-error design at n = 25000.
const REFERENCE_RMSE: [f64; 9] = [0.0422, 0.0238, 0.0222, 0.0470, 0.1019, 0.0202, 0.0264, 0.0432, 0.0979];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for order in [2u32, 4, 6] {
        let k = make_kernel::<f64>(order).expect("supported order");
        let r = verify_moments(&k, 1e-8).expect("valid tolerance");
        let lead = r.moment(order).abs();
        let ok = r.integrates_to_one && r.vanishing_moments && lead > 1e-3;
        pass &= ok;
        notes.push(format!("order {order}: int K={} |m_{order}|={lead:.6}", r.moments[0].exact));
    }
    let r = |n, d| Rational64::new(n, d);
    let printed = KernelSpec::<f64>::from_factors(6, r(525, 256), &[r(1, 1), r(-6, 1), r(-33, 5)]).expect("valid");
    let rep = verify_moments(&printed, 1e-8).expect("valid tolerance");
    let mass = rep.moment(0);
    let printed_fails = !rep.integrates_to_one && (mass + 2.0937).abs() < 1e-4;
    pass &= printed_fails;
    notes.push(format!("sign variant int K={mass:.4} (rejected: {printed_fails})"));
    outcome(pass, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let spec = DgpSpec::new(600, 10, ErrorFamily::Normal, 202);
    let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
    let start = logit_init(&d).expect("logit start");
    let cfg = GdConfig {
        batch_size: d.n(),
        floor: mindex::TruncationFloor::Fixed(1e-300),
        ..GdConfig::default()
    };
    let est = Estimator::new(&d, &cfg, &start).expect("valid config");
    let mut a = IterationState::new(start.clone(), 0, 0);
    let mut b = IterationState::new(start, 0, 0);
    let all: Vec<usize> = (0..d.n()).collect();
    let mut bitwise = true;
    for _ in 0..3 {
        est.kbgd_step(&mut a).expect("step");
        est.kmbgd_step_with(&mut b, &all).expect("step");
        bitwise &= a.beta.beta.iter().zip(&b.beta.beta).all(|(x, y)| x.to_bits() == y.to_bits());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(1..400);
        let order = [2u32, 4, 6][rng.random_range(0..3)];
        let k = make_kernel::<f64>(order).expect("supported");
        let scale = rng.random_range(0.1..10.0);
        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let y: Vec<f64> = (0..m).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let ev: Vec<f64> = (0..50).map(|_| rng.random_range(-1.2..1.2) * scale).collect();
        let h = rng.random_range(0.01..0.5) * scale;
        let naive = naive_eval(&ev, &z, &y, h, &k).expect("valid");
        let fast = nw_components(&ev, &z, &y, h, &k, NwOptions::serial(NwPath::Fast)).expect("valid");
        for (p, q) in naive.iter().zip(&fast) {
            for (u, v) in [(p.num, q.num), (p.den, q.den)] {
                let rel = (u - v).abs() / u.abs().max(v.abs()).max(f64::MIN_POSITIVE);
                if u != v {
                    worst = worst.max(rel);
                }
            }
        }
    }
    outcome(
        bitwise && worst <= 1e-10,
        format!("identity draw == full step bitwise: {bitwise}; fast vs naive worst relative gap {worst:.1e} over 50 instances"),
    )
}

fn criterion_3() -> Outcome {
    let spec = DgpSpec::new(60, 4, ErrorFamily::Logistic, 303);
    let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
    let beta = Coefficients::new(vec![0.7, 0.4, 1.5, -0.3]).expect("finite");
    let cfg = GdConfig { batch_size: 1, floor: mindex::TruncationFloor::Fixed(1e-6), ..GdConfig::default() };
    let est = Estimator::new(&d, &cfg, &beta).expect("valid config");
    let z = compute_index(&d, &beta).expect("shapes").z;
    let h = mindex::bandwidth(&cfg.bw_rule, &z, d.n()).expect("spread");
    let g = mindex::nw_full(&z, &z, d.y(), h, &cfg.kernel, NwOptions::default()).expect("valid");
    let g = |i: usize| g[i].expect("own points have positive density");
    let all: Vec<usize> = (0..d.n()).collect();
    let full = est.subsample_gradient(&all, g);
    let mut avg = vec![0.0; d.p()];
    for i in 0..d.n() {
        for (a, v) in avg.iter_mut().zip(est.subsample_gradient(&[i], g)) {
            *a += v / d.n() as f64;
        }
    }
    let gap = full.iter().zip(&avg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(gap <= 1e-12, format!("n=60, B=1 enumeration vs full gradient: max gap {gap:.1e}"))
}

fn criterion_4() -> Outcome {
    let link = |t: f64| ErrorFamily::Logistic.cdf(t);
    let mut hits = 0;
    let mut errs = Vec::new();
    for seed in 0..10 {
        let spec = DgpSpec::new(10_000, 2, ErrorFamily::Logistic, 400 + seed);
        let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
        let mut s = IterationState::new(Coefficients::zeros(2), 0, 0);
        let mut ok = true;
        for _ in 0..500 {
            if bgd_step_known_g(&mut s, &d, link, 1.0).is_err() {
                ok = false;
                break;
            }
        }
        let e = s.beta.beta.iter().zip(&spec.beta_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        errs.push(e);
        if ok && e < 0.1 {
            hits += 1;
        }
    }
    outcome(hits >= 9, format!("{hits}/10 seeds within 0.1; errors {}", fmt_vec(&errs)))
}

fn desk_config(seed: u64) -> GdConfig<f64> {
    GdConfig { batch_size: 1000, burn_in: 2000, follow_t: 3000, seed, ..GdConfig::default() }
}

fn criterion_5(report: &McReport) -> Outcome {
    let k = 9;
    let scale = 5f64.sqrt();
    let bias_ok = report.bias.iter().all(|b| b.abs() < 0.05);
    let ratios: Vec<f64> = (0..k).map(|j| report.rmse[j] / (scale * REFERENCE_RMSE[j])).collect();
    let rmse_ok = ratios.iter().all(|&r| (0.5..=2.5).contains(&r));
    let cov: Vec<f64> = report.coverage.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
    let cov_ok = cov.iter().all(|&c| (0.88..=1.0).contains(&c));
    let complete = report.failures == 0;
    outcome(
        bias_ok && rmse_ok && cov_ok && complete,
        format!(
            "R={} failed={}; |bias| {}; rmse/target {}; coverage {}",
            report.replications,
            report.failures,
            fmt_vec(&report.bias),
            fmt_vec(&ratios),
            fmt_vec(&cov)
        ),
    )
}

fn criterion_6() -> (Outcome, Option<f64>) {
    let spec = DgpSpec::new(25_000, 10, ErrorFamily::Normal, 606);
    let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
    let cfg = GdConfig { batch_size: 3000, burn_in: 2000, follow_t: 8000, seed: 6, ..GdConfig::default() };
    let est = match run_akmbgd(&d, &cfg, &RunOptions::default()) {
        Ok(e) => e,
        Err(e) => return (outcome(false, format!("estimation failed: {e}")), None),
    };
    let errs: Vec<f64> = (0..9).map(|j| (est.beta_bar.beta[j] - spec.beta_star[j]).abs()).collect();
    let ratio: Vec<f64> = errs.iter().zip(REFERENCE_RMSE).map(|(e, r)| e / r).collect();
    let pass = ratio.iter().all(|&r| r <= 4.0);
    let resid = covariance(&d, &est.beta_bar, &InferenceConfig::default()).ok().map(|c| identity_residual(&c));
    (outcome(pass, format!("|error| / reference RMSE {}", fmt_vec(&ratio))), resid)
}

fn criterion_7() -> Outcome {
    let spec = DgpSpec::new(20_000, 10, ErrorFamily::Normal, 707);
    let cfg = |b: usize| GdConfig { batch_size: b, seed: 7, ..GdConfig::default() };
    let runs = [
        (Algorithm::KmbgdNaive, cfg(1000), 31),
        (Algorithm::KmbgdNaive, cfg(2000), 21),
        (Algorithm::KmbgdNaive, cfg(3000), 11),
        (Algorithm::KbgdNaive, cfg(3000), 3),
    ];
    let mut med = Vec::new();
    for (alg, c, iters) in runs {
        match run_bench(&spec, &[(alg, c)], BenchOptions { iters, pinned: true }) {
            Ok(t) => med.push(t[0].median_update_seconds().unwrap_or(f64::NAN)),
            Err(e) => return outcome(false, format!("benchmark failed: {e}")),
        }
    }
    let quad = med[1] / med[0];
    let full = med[3] / med[2];
    outcome(
        (3.0..=5.0).contains(&quad) && full >= 25.0,
        format!(
            "median update: B=1000 {:.4}s, B=2000 {:.4}s (ratio {quad:.2}); full n=20000 {:.3}s vs B=3000 {:.4}s (ratio {full:.1})",
            med[0], med[1], med[3], med[2]
        ),
    )
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Per-coefficient `var(beta_bar) / var(last iterate)` across 20 runs.
/// `data_seed` maps the run index to the dataset seed.
fn averaging_ratios(data_seed: impl Fn(u64) -> u64) -> Result<Vec<f64>, String> {
    let p = 10;
    let mut bars = vec![Vec::new(); p];
    let mut lasts = vec![Vec::new(); p];
    for seed in 0..20u64 {
        let spec = DgpSpec::new(5000, p, ErrorFamily::Logistic, data_seed(seed));
        let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
        let e = run_akmbgd(&d, &desk_config(seed), &RunOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        for j in 0..p {
            bars[j].push(e.beta_bar.beta[j]);
            lasts[j].push(e.last_iterate.beta[j]);
        }
    }
    Ok((0..p).map(|j| variance(&bars[j]) / variance(&lasts[j])).collect())
}

fn criterion_8() -> Outcome {
    // Each seed draws a fresh dataset and fresh subsamples.
    let ratio = match averaging_ratios(|s| 800 + s) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let wins = ratio.iter().filter(|&&r| r < 1.0).count();
    // Diagnostic only: one dataset, subsample seeds vary.
    let fixed = averaging_ratios(|_| 800)
        .map(|r| fmt_vec(&r))
        .unwrap_or_else(|e| format!("failed: {e}"));
    outcome(
        wins >= 8,
        format!("averaged variance smaller for {wins}/10; var ratio {}; [info] fixed dataset ratio {fixed}", fmt_vec(&ratio)),
    )
}

fn criterion_9() -> Outcome {
    let spec = DgpSpec::new(100_000, 2, ErrorFamily::Logistic, 909);
    let (d, _) = generate_dataset::<f64>(&spec).expect("valid design");
    let beta = match logit_init(&d) {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("start failed: {e}")),
    };
    let grid = GridSpec::span(401);
    let curve = match estimate_cdf_curve(&d, &beta, &grid, &InferenceConfig::default(), false) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("curve failed: {e}")),
    };
    let lo = curve.grid.first().copied().unwrap_or(0.0);
    let hi = curve.grid.last().copied().unwrap_or(0.0);
    let (a, b) = (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
    let sup = curve
        .grid
        .iter()
        .zip(&curve.values)
        .filter(|(z, _)| (a..=b).contains(*z))
        .map(|(&z, &g)| (g - ErrorFamily::Logistic.cdf(z)).abs())
        .fold(0.0, f64::max);
    // Diagnostic only: the same distance between the 10% and 90% index quantiles.
    let mut z = compute_index(&d, &beta).expect("shapes").z;
    z.sort_by(f64::total_cmp);
    let (qa, qb) = (z[z.len() / 10], z[z.len() * 9 / 10]);
    let sup_q = curve
        .grid
        .iter()
        .zip(&curve.values)
        .filter(|(z, _)| (qa..=qb).contains(*z))
        .map(|(&z, &g)| (g - ErrorFamily::Logistic.cdf(z)).abs())
        .fold(0.0, f64::max);
    outcome(
        sup < 0.05,
        format!(
            "sup |G_hat - logistic| on [{a:.2}, {b:.2}] = {sup:.4} ({} missing); [info] on quantile band [{qa:.2}, {qb:.2}] = {sup_q:.4}",
            curve.missing
        ),
    )
}

fn criterion_10(residuals: &[Option<f64>]) -> Outcome {
    let missing = residuals.iter().filter(|r| r.is_none()).count();
    let worst = residuals.iter().flatten().copied().fold(0.0, f64::max);
    outcome(
        missing == 0 && worst <= 1e-8,
        format!("{} runs, worst relative residual {worst:.1e}, {missing} without a covariance", residuals.len()),
    )
}

fn report(id: u32, name: &str, budget_s: f64, t: Instant, o: Outcome, failures: &mut Vec<u32>) {
    let secs = t.elapsed().as_secs_f64();
    let pass = o.pass && secs < budget_s;
    if !pass {
        failures.push(id);
    }
    println!(
        "criterion {id:>2} {} | {name} | {:.1}s (budget {budget_s:.0}s) | {}",
        if pass { "PASS" } else { "FAIL" },
        secs,
        o.detail
    );
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        // libtest-style discovery: nothing to list.
        return ExitCode::SUCCESS;
    }
    let mut failures = Vec::new();

    let t = Instant::now();
    report(1, "kernel moments", 1.0, t, criterion_1(), &mut failures);
    let t = Instant::now();
    report(2, "oracle equivalence", 60.0, t, criterion_2(), &mut failures);
    let t = Instant::now();
    report(3, "conditional unbiasedness", 1.0, t, criterion_3(), &mut failures);
    let t = Instant::now();
    report(4, "known-link consistency", 60.0, t, criterion_4(), &mut failures);

    let t = Instant::now();
    let dgp = DgpSpec::new(5000, 10, ErrorFamily::Normal, 505);
    let mc = run_monte_carlo(&dgp, &desk_config(5), &InferenceConfig::default(), 50);
    let mut residuals = Vec::new();
    let c5 = match &mc {
        Ok(r) => {
            residuals.extend(std::iter::repeat_n(r.max_identity_residual, 1));
            residuals.extend(std::iter::repeat_n(None, r.inference_failures));
            criterion_5(r)
        }
        Err(e) => outcome(false, format!("Monte Carlo failed: {e}")),
    };
    report(5, "desk-scale Monte Carlo", 1800.0, t, c5, &mut failures);

    let t = Instant::now();
    let (c6, resid6) = criterion_6();
    residuals.push(resid6);
    report(6, "single replication at n = 25000", 1200.0, t, c6, &mut failures);

    let t = Instant::now();
    report(7, "per-update complexity", f64::INFINITY, t, criterion_7(), &mut failures);
    let t = Instant::now();
    report(8, "averaging benefit", f64::INFINITY, t, criterion_8(), &mut failures);
    let t = Instant::now();
    report(9, "link curve", 120.0, t, criterion_9(), &mut failures);
    let t = Instant::now();
    report(10, "sandwich identity", f64::INFINITY, t, criterion_10(&residuals), &mut failures);

    if failures.is_empty() {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failures:?}");
        ExitCode::FAILURE
    }
}
