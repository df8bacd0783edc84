//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test -p ushift-cli --test acceptance -- --nocapture`).
//!
//! Criteria combine exact-identity checks, analytic oracles and
//! pre-registered Monte Carlo trends; every tolerance is pinned here.

use std::time::Instant;

use ushift_core::dependence::{
    dependence_profile, holder_theta_bound, theta_coefficient, variance_kernel_theta_bound,
};
use ushift_core::hoeffding::{
    audit_pair_coverage, decompose_level, generalized_decomposition, level_kernel, required_span,
    DecomposeConfig,
};
use ushift_core::kernels::PairKernel;
use ushift_core::limits::{clt_experiment, lil_statistic, lln_experiment, remainder_decay, sigma_squared, ExperimentConfig};
use ushift_core::processes::{coeffs, InnovationSpec, InnovationStrip, ShiftFunctional, ShiftProcess};
use ushift_core::rng::RngStream;

const SIGMA2_MA1: f64 = 1.03125; // sum_k Cov(Y_0, Y_k) by the Wick formula

fn ma2_rademacher() -> ShiftProcess {
    ShiftProcess::new(
        InnovationSpec::Rademacher,
        ShiftFunctional::linear(coeffs(&[(0, 1.0), (1, 0.5), (2, 0.25)])),
    )
    .unwrap()
}

fn ma1_gaussian() -> ShiftProcess {
    ShiftProcess::new(
        InnovationSpec::Gaussian { mean: 0.0, std: 1.0 },
        ShiftFunctional::linear(coeffs(&[(0, 1.0), (1, 0.5)])),
    )
    .unwrap()
}

fn ma1_rademacher() -> ShiftProcess {
    ShiftProcess::new(
        InnovationSpec::Rademacher,
        ShiftFunctional::linear(coeffs(&[(0, 1.0), (1, 0.5)])),
    )
    .unwrap()
}

fn verdict(name: &str, pass: bool, detail: &str, started: Instant) {
    println!(
        "{} acceptance {name}: {detail} [{:.2?}]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed()
    );
    assert!(pass, "acceptance {name} failed: {detail}");
}

#[test]
fn c01_decomposition_identity() {
    let started = Instant::now();
    let process = ma2_rademacher();
    let kernel = PairKernel::variance();
    let cfg = DecomposeConfig::default();
    let mut worst_level = 0.0f64;
    for &n in &[50usize, 100, 200] {
        for ell in 1..=3usize {
            let lk = level_kernel(&kernel, &process, ell, cfg.tail_samples);
            for seed in 0..20u64 {
                let stream = RngStream::root(seed);
                let (lo, hi) = required_span(ell, n);
                let strip =
                    InnovationStrip::sample(process.innovations, lo.min(-2), hi.max(n as i64 + 2), stream.child(1))
                        .unwrap();
                let d = decompose_level(&lk, &strip, n, &cfg, stream).unwrap();
                worst_level = worst_level.max(d.relative_residual());
            }
        }
    }
    let mut worst_total = 0.0f64;
    for &n in &[50usize, 100, 200] {
        for seed in 0..20u64 {
            let g = generalized_decomposition(&kernel, &process, n, 2, &cfg, RngStream::root(seed)).unwrap();
            worst_total = worst_total.max(g.relative_residual);
        }
    }
    let pass = worst_level <= 1e-9 && worst_total <= 1e-9;
    verdict(
        "c01 decomposition-identity",
        pass,
        &format!("worst per-level residual {worst_level:.2e}, worst generalized residual {worst_total:.2e} (tolerance 1e-9)"),
        started,
    );
}

#[test]
fn c02_pair_coverage_audit() {
    let started = Instant::now();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for ell in 1..=2usize {
        for n in 2..=60usize {
            let audit = audit_pair_coverage(n, ell);
            checked += 1;
            if !audit.ok {
                failures.push((n, ell, audit.violations.len()));
            }
        }
    }
    let pass = failures.is_empty();
    verdict(
        "c02 pair-coverage-audit",
        pass,
        &format!("{checked} (n, level) grids audited exhaustively, violations: {failures:?}"),
        started,
    );
}

#[test]
fn c03_classical_recovery() {
    let started = Instant::now();
    let process = ShiftProcess::new(
        InnovationSpec::Gaussian { mean: 0.0, std: 1.0 },
        ShiftFunctional::linear(coeffs(&[(0, 1.0)])),
    )
    .unwrap();
    let kernel = PairKernel::variance();
    let n = 200;
    let cfg = DecomposeConfig::default();
    let stream = RngStream::root(42);
    let strip = InnovationStrip::sample(process.innovations, 1, n as i64, stream.child(1)).unwrap();
    let lk = level_kernel(&kernel, &process, 0, 1);
    let d = decompose_level(&lk, &strip, n, &cfg, stream).unwrap();

    // independent oracle: h1(x) = (x^2 - 1)/2, h2(x, y) = -x y
    let xs: Vec<f64> = (1..=n as i64).map(|j| strip.get(j)).collect();
    let oracle_linear = n as f64 * xs.iter().map(|x| 0.5 * (x * x - 1.0)).sum::<f64>();
    let mut oracle_deg = 0.0;
    for j in 1..n {
        for i in 0..j {
            oracle_deg += -xs[i] * xs[j];
        }
    }
    let lin_err = (d.linear_part - oracle_linear).abs() / oracle_linear.abs();
    let deg_err = (d.degenerate[&(1, 1)] - oracle_deg).abs() / oracle_deg.abs();
    let pass = lin_err <= 1e-10 && deg_err <= 1e-10;
    verdict(
        "c03 classical-recovery",
        pass,
        &format!("linear relative error {lin_err:.2e}, degenerate relative error {deg_err:.2e} (tolerance 1e-10)"),
        started,
    );
}

#[test]
fn c04_sigma_squared_oracle() {
    let started = Instant::now();
    let est = sigma_squared(
        &PairKernel::variance(),
        &ma1_gaussian(),
        6,
        1_000_000,
        4,
        &ExperimentConfig::default(),
        RngStream::root(4),
    )
    .unwrap();
    let rel = (est.sigma2 - SIGMA2_MA1).abs() / SIGMA2_MA1;
    let pass = rel <= 0.05;
    verdict(
        "c04 sigma2-oracle",
        pass,
        &format!("sigma2 = {:.5} vs 1.03125 (relative error {rel:.3}, tolerance 0.05)", est.sigma2),
        started,
    );
}

#[test]
fn c05_clt() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        sigma_path_len: 500_000,
        sigma_reps: 4,
        ..Default::default()
    };
    let report = clt_experiment(
        &PairKernel::variance(),
        &ma1_gaussian(),
        2000,
        1000,
        6,
        &cfg,
        RngStream::root(5),
    )
    .unwrap();
    let var = report.summary_f64("var_z").unwrap();
    let ks = report.summary_f64("ks_distance").unwrap();
    let var_rel = (var - SIGMA2_MA1).abs() / SIGMA2_MA1;
    let pass = var_rel <= 0.07 && ks <= 0.06;
    verdict(
        "c05 clt",
        pass,
        &format!("empirical variance {var:.4} (relative error {var_rel:.3}, tolerance 0.07), KS distance {ks:.4} (tolerance 0.06)"),
        started,
    );
}

#[test]
fn c06_lln_trend() {
    let started = Instant::now();
    let report = lln_experiment(
        &PairKernel::variance(),
        &ma1_gaussian(),
        1.5,
        8000,
        None,
        100,
        &ExperimentConfig::default(),
        RngStream::root(6),
    )
    .unwrap();
    let ratio = report.summary_f64("ratio_4000_median").unwrap();
    let pass = ratio < 0.5;
    verdict(
        "c06 lln-trend",
        pass,
        &format!("median T(4000)/T(250) = {ratio:.4} (threshold 0.5)"),
        started,
    );
}

#[test]
fn c07_lil_stabilization() {
    let started = Instant::now();
    let report = lil_statistic(
        &PairKernel::variance(),
        &ma1_gaussian(),
        10_000,
        200,
        &ExperimentConfig::default(),
        RngStream::root(7),
    )
    .unwrap();
    let ratio = report.summary_f64("q99_growth_ratio").unwrap();
    let pass = ratio <= 1.2;
    verdict(
        "c07 lil-stabilization",
        pass,
        &format!("q99 sup at n=10000 over q99 at n=5000 = {ratio:.4} (threshold 1.2)"),
        started,
    );
}

#[test]
fn c08_theta_exactness_and_bounds() {
    let started = Instant::now();
    let mut detail = String::new();
    let mut pass = true;

    // exact zero beyond the window, for both linear and custom functionals
    let profile = dependence_profile(
        &PairKernel::variance(),
        &ma2_rademacher(),
        4,
        1.0,
        2000,
        64,
        RngStream::root(8),
    )
    .unwrap();
    for e in profile.entries.iter().filter(|e| e.ell > 2) {
        if e.theta_hat != 0.0 {
            pass = false;
            detail.push_str(&format!("theta({}, 1) = {} != 0; ", e.ell, e.theta_hat));
        }
    }
    let custom = ShiftProcess::new(
        InnovationSpec::Rademacher,
        ShiftFunctional::custom(1, |v: &[f64]| v[0] * v[1] * v[2]),
    )
    .unwrap();
    let t = theta_coefficient(&PairKernel::variance(), &custom, 2, 1.0, 200, 64, RngStream::root(9)).unwrap();
    if t.theta_hat != 0.0 {
        pass = false;
        detail.push_str("custom-functional theta beyond W is nonzero; ");
    }

    // sum-kernel values against the 4-pattern enumeration oracle:
    // lag 0 doubles to 2 a_l, lags >= 1 give a_l
    let one_sided = ma2_rademacher();
    for (ell, a_ell) in [(1usize, 0.5f64), (2, 0.25)] {
        let t = theta_coefficient(&PairKernel::sum(), &one_sided, ell, 1.0, 50_000, 1, RngStream::root(10)).unwrap();
        for lag in &t.per_lag {
            let oracle = if lag.lag == 0 { 2.0 * a_ell } else { a_ell };
            if (lag.value - oracle).abs() > 3.0 * lag.se.max(1e-3) {
                pass = false;
                detail.push_str(&format!(
                    "sum-kernel level {ell} lag {}: {} vs oracle {oracle}; ",
                    lag.lag, lag.value
                ));
            }
        }
    }

    // every applicable bound dominates its theta on the built-in configs
    let holder_kernel = PairKernel::sum().with_holder(1.0, 1.0).unwrap();
    for (name, process, w) in [
        ("ma1-rademacher", ma1_rademacher(), 1usize),
        ("ma2-rademacher", ma2_rademacher(), 2),
    ] {
        for ell in 1..=w {
            let t = theta_coefficient(&holder_kernel, &process, ell, 1.0, 50_000, 1, RngStream::root(11)).unwrap();
            let b = holder_theta_bound(&holder_kernel, &process, ell, 1.0, 50_000, 1, RngStream::root(11)).unwrap();
            if t.theta_hat > b.value + 3.0 * (t.se + b.se) {
                pass = false;
                detail.push_str(&format!(
                    "holder bound on {name} level {ell}: theta {} > bound {}; ",
                    t.theta_hat, b.value
                ));
            }
        }
    }
    for (name, process, w) in [
        ("ma2-rademacher", ma2_rademacher(), 2usize),
        ("ma1-gaussian", ma1_gaussian(), 1),
    ] {
        for ell in 1..=w {
            let t =
                theta_coefficient(&PairKernel::variance(), &process, ell, 1.0, 50_000, 1, RngStream::root(12)).unwrap();
            let b = variance_kernel_theta_bound(&process, ell, 1.0, 50_000, 1, RngStream::root(12)).unwrap();
            if t.theta_hat > b.proof.value + 3.0 * (t.se + b.proof.se) {
                pass = false;
                detail.push_str(&format!(
                    "variance bound on {name} level {ell}: theta {} > proof bound {}; ",
                    t.theta_hat, b.proof.value
                ));
            }
        }
    }

    if detail.is_empty() {
        detail = "exact zeros beyond W, enumeration oracle within 3 SE, all bounds dominate".into();
    }
    verdict("c08 theta-exactness", pass, &detail, started);
}

#[test]
fn c09_remainder_decay() {
    let started = Instant::now();
    let grid = [200usize, 400, 800, 1600];
    let report = remainder_decay(
        &PairKernel::variance(),
        &ma1_gaussian(),
        &grid,
        1,
        160,
        &ExperimentConfig::default(),
        RngStream::root(13),
    )
    .unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for name in ["r11", "r12", "r2", "r3", "r4", "r5", "r6", "r7"] {
        let ratio = report.summary_f64(&format!("decay_ratio_{name}")).unwrap();
        if ratio >= 0.5 {
            pass = false;
            detail.push_str(&format!("{name} terminal/initial ratio {ratio:.3} >= 0.5; "));
        }
    }
    for &n in &grid {
        let est = report.summary_f64(&format!("mean_r7_n{n}")).unwrap();
        let est_se = report.summary_f64(&format!("se_r7_n{n}")).unwrap();
        let bound = report.summary_f64(&format!("bound_r7_n{n}")).unwrap();
        let bound_se = report.summary_f64(&format!("bound_r7_se_n{n}")).unwrap();
        if est > bound + 3.0 * (est_se + bound_se) {
            pass = false;
            detail.push_str(&format!("R7 bound violated at n={n}: {est:.4} > {bound:.4}; "));
        }
    }
    if detail.is_empty() {
        let r = report.summary_f64("decay_ratio_r7").unwrap();
        detail = format!("all eight columns decay (R7 ratio {r:.3}), R7 bound dominates at every n");
    }
    verdict("c09 remainder-decay", pass, &detail, started);
}

#[test]
fn c10_cli_determinism() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("acceptance.toml");
    std::fs::write(
        &config_path,
        r#"
[process]
distribution = "gaussian"
mean = 0.0
std = 1.0
kind = "linear"
coeffs = { "0" = 1.0, "1" = 0.5 }

[kernel]
name = "variance"

[experiment]
n = 160
replications = 64
p = 1.5
n_max = 320
k_max = 4
l_max = 1
n_grid = [60, 120]
checkpoints = [40, 80, 320]
sigma_path_len = 30000
sigma_reps = 4
moment_reps = 4000
"#,
    )
    .unwrap();
    let config = config_path.to_str().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for cmd in ["simulate", "decompose", "theta", "clt", "lln", "lil", "remainders"] {
        let out1 = tmp.path().join(format!("{cmd}_a"));
        let out4 = tmp.path().join(format!("{cmd}_b"));
        for (out, workers) in [(&out1, "1"), (&out4, "4")] {
            let code = ushift_cli::run([
                "ushift",
                cmd,
                "--config",
                config,
                "--seed",
                "99",
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ]);
            if code != 0 {
                pass = false;
                detail.push_str(&format!("{cmd} exited {code}; "));
            }
        }
        for name in [format!("{cmd}.csv"), format!("{cmd}_summary.txt")] {
            let a = std::fs::read(out1.join(&name)).unwrap_or_default();
            let b = std::fs::read(out4.join(&name)).unwrap_or_default();
            if a.is_empty() || a != b {
                pass = false;
                detail.push_str(&format!("{name} not byte-identical; "));
            }
        }
    }
    if detail.is_empty() {
        detail = "all seven subcommands byte-identical across worker counts".into();
    }
    verdict("c10 cli-determinism", pass, &detail, started);
}
