//! Monte Carlo experiments for the three limit theorems.
//!
//! * `lln_experiment` — Marcinkiewicz normalization `n^{-(1+1/p)}`, tracked
//!   through the maximal statistic `T(N) = max_{N <= m <= n_max} ...` at
//!   geometric checkpoints;
//! * `lil_statistic` — the iterated-logarithm sup `max_m |U_m - E U_m| /
//!   (m^{3/2} sqrt(LL m))`, whose boundedness is operationalized as quantile
//!   stabilization between two horizon lengths;
//! * `clt_experiment` — replicated `n^{-3/2} (U_n - E U_n)` against
//!   `N(0, sigma^2)` with `sigma^2 = sum_k Cov(Y_0, Y_k)` estimated from long
//!   paths;
//! * `remainder_decay` — normalized magnitudes of every remainder term of the
//!   block decomposition, including the linear-sum mismatch `R_7` and its
//!   `2 n^{-1/2} sum_l l theta_{l,1}` bound.
//!
//! Replications are independent tasks over seeded substreams; results land in
//! pre-assigned slots, so reports are identical for any worker count.

use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::hoeffding::{build_level_context, level_remainders_and_r7, ProjectionConfig};
use crate::kernels::PairKernel;
use crate::numeric::{mean_se, median, quantile, Kahan};
use crate::processes::{generate_path, InnovationStrip, ShiftProcess};
use crate::report::ExperimentReport;
use crate::rng::{tag, RngStream};
use crate::ustat::{lag_mean_table, u_statistic, u_statistic_prefixes};

/// Iterated logarithm clamped at one: `LL(x) = L(L(x))`, `L(x) = max(ln x, 1)`.
pub fn ll_function(x: f64) -> f64 {
    assert!(x >= 0.0, "LL is defined on [0, inf), got {x}");
    let l1 = x.ln().max(1.0);
    l1.ln().max(1.0)
}

/// Monte Carlo budgets shared by the experiments.
#[derive(Clone, Copy, Debug)]
pub struct ExperimentConfig {
    /// tail resampling per conditional truncation of a custom functional
    pub tail_samples: usize,
    /// replications for centering constants and level moments
    pub moment_reps: usize,
    /// ensemble size backing projections of custom kernels
    pub ensemble_size: usize,
    /// path length per long-run-variance replication
    pub sigma_path_len: usize,
    /// independent paths for the long-run variance
    pub sigma_reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tail_samples: 4096,
            moment_reps: 100_000,
            ensemble_size: 4096,
            sigma_path_len: 200_000,
            sigma_reps: 8,
        }
    }
}

impl ExperimentConfig {
    fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            tail_samples: self.tail_samples,
            moment_reps: self.moment_reps,
            ensemble_size: self.ensemble_size,
        }
    }
}

/// `Y_{k,l}`: conditional expectation of the kernel against a fresh copy,
/// centered; a function of the level-`l` window.
pub fn y_value(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    window: &[f64],
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<f64> {
    let ctx = build_level_context(kernel, process, ell, &cfg.projection(), stream)?;
    let f = process.truncated(ell, window, cfg.tail_samples, stream.child(tag::TAIL))?;
    Ok(ctx.proj.g(f) - ctx.moments.nu_inf)
}

/// Truncated long-run variance `sigma^2 = sum_{|k| <= k_max} Cov(Y_0, Y_k)`
/// from long simulated paths at level `l = W` (exact for finite windows).
#[derive(Clone, Debug)]
pub struct SigmaEstimate {
    pub sigma2: f64,
    pub se: f64,
    /// mean autocovariance per lag `0..=k_max`
    pub covariances: Vec<f64>,
}

pub fn sigma_squared(
    kernel: &PairKernel,
    process: &ShiftProcess,
    k_max: usize,
    path_len: usize,
    reps: usize,
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<SigmaEstimate> {
    if reps < 2 {
        return Err(Error::Argument("sigma_squared needs at least 2 path replications".into()));
    }
    if path_len < 4 * (k_max + 1) {
        return Err(Error::Argument(format!(
            "path length {path_len} is too short for k_max = {k_max}"
        )));
    }
    let w = process.window_halfwidth();
    let ctx = build_level_context(kernel, process, w, &cfg.projection(), stream)?;

    let per_rep: Vec<(f64, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>)> {
            let sub = stream.child(tag::SIGMA).child(r as u64);
            let strip =
                InnovationStrip::sample(process.innovations, 1 - w as i64, path_len as i64 + w as i64, sub)?;
            let ys: Vec<f64> = (1..=path_len as i64)
                .map(|j| ctx.proj.g(process.eval_window(strip.window(j, w))) - ctx.moments.nu_inf)
                .collect();
            let mut mean = Kahan::new();
            for &y in &ys {
                mean.add(y);
            }
            let mean = mean.value() / path_len as f64;
            let mut gammas = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                let mut acc = Kahan::new();
                for j in 0..path_len - k {
                    acc.add((ys[j] - mean) * (ys[j + k] - mean));
                }
                gammas.push(acc.value() / path_len as f64);
            }
            let sigma2 = gammas[0] + 2.0 * gammas[1..].iter().sum::<f64>();
            Ok((sigma2, gammas))
        })
        .collect::<Result<_>>()?;

    let sigmas: Vec<f64> = per_rep.iter().map(|(s, _)| *s).collect();
    let est = mean_se(&sigmas);
    let covariances = (0..=k_max)
        .map(|k| per_rep.iter().map(|(_, g)| g[k]).sum::<f64>() / reps as f64)
        .collect();
    Ok(SigmaEstimate {
        sigma2: est.value,
        se: est.se,
        covariances,
    })
}

const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// One-sample Kolmogorov–Smirnov distance against a reference CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty());
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Replicated `n^{-3/2} (U_n - E U_n)` compared against `N(0, sigma2_hat)`.
pub fn clt_experiment(
    kernel: &PairKernel,
    process: &ShiftProcess,
    n: usize,
    reps: usize,
    k_max: usize,
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<ExperimentReport> {
    if reps < 2 {
        return Err(Error::Argument("clt_experiment needs at least 2 replications".into()));
    }
    let started = Instant::now();
    let sigma = sigma_squared(
        kernel,
        process,
        k_max,
        cfg.sigma_path_len,
        cfg.sigma_reps,
        cfg,
        stream.child(tag::SIGMA),
    )?;
    if sigma.sigma2 <= 2.0 * sigma.se {
        return Err(Error::DegenerateVariance {
            sigma2: sigma.sigma2,
            se: sigma.se,
        });
    }

    let table = lag_mean_table(kernel, process, cfg.moment_reps, stream.child(tag::CENTERING))?;
    let expected = table.expected_u(n);
    let scale = (n as f64).powf(1.5);

    let zs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let path = generate_path(process, n, stream.child(tag::REPLICATION).child(r as u64))?;
            let u = u_statistic(kernel, &path.values)?;
            Ok((u - expected) / scale)
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new("clt", stream.seed(), vec!["rep".into(), "z".into()]);
    report.rows = zs.iter().enumerate().map(|(r, &z)| vec![r as f64, z]).collect();

    let mean = mean_se(&zs);
    let var = crate::numeric::sample_variance(&zs);
    let sd = sigma.sigma2.sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::Numeric(format!("normal law: {e}")))?;
    let ks = ks_distance(&zs, |x| normal.cdf(x));

    report.push_summary("n", n);
    report.push_summary("replications", reps);
    report.push_summary("sigma2_hat", sigma.sigma2);
    report.push_summary("sigma2_se", sigma.se);
    report.push_summary("expected_u", expected);
    report.push_summary("mean_z", mean.value);
    report.push_summary("mean_z_tol", 4.0 * (sigma.sigma2 / reps as f64).sqrt());
    report.push_summary("var_z", var);
    report.push_summary("ks_distance", ks);
    for q in QUANTILE_LEVELS {
        report.push_summary(&format!("q{:02}_empirical", (q * 100.0) as u32), quantile(&zs, q));
        report.push_summary(&format!("q{:02}_normal", (q * 100.0) as u32), normal.inverse_cdf(q));
    }
    for (k, g) in sigma.covariances.iter().enumerate() {
        report.push_summary(&format!("cov_y_{k}"), *g);
    }
    report.runtime = started.elapsed();
    Ok(report)
}

/// Geometric checkpoints (doubling) for the maximal-statistic experiments.
pub fn default_checkpoints(n_max: usize) -> Vec<usize> {
    let start = if n_max >= 2000 { 250 } else { (n_max / 8).max(2) };
    let mut out = Vec::new();
    let mut c = start;
    while c <= n_max {
        out.push(c);
        c *= 2;
    }
    if *out.last().unwrap_or(&0) != n_max {
        out.push(n_max);
    }
    out
}

fn validate_checkpoints(checkpoints: &[usize], n_max: usize) -> Result<()> {
    if checkpoints.len() < 2 {
        return Err(Error::Argument("at least two checkpoints are required".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("checkpoints must be strictly increasing".into()));
    }
    if checkpoints[0] < 2 || *checkpoints.last().unwrap() > n_max {
        return Err(Error::Argument(format!(
            "checkpoints must sit in [2, {n_max}]"
        )));
    }
    Ok(())
}

/// Per replication: the prefix trajectory's maximal statistic
/// `T(N) = max_{N <= m <= n_max} m^{-(1+1/p)} |U_m - E U_m|` at each
/// checkpoint, with median / 0.9-quantile decay ratios in the summary.
pub fn lln_experiment(
    kernel: &PairKernel,
    process: &ShiftProcess,
    p: f64,
    n_max: usize,
    checkpoints: Option<&[usize]>,
    reps: usize,
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<ExperimentReport> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::Argument(format!("p in [1,2) required, got {p}")));
    }
    if reps < 2 {
        return Err(Error::Argument("lln_experiment needs at least 2 replications".into()));
    }
    let started = Instant::now();
    let cps = match checkpoints {
        Some(c) => c.to_vec(),
        None => default_checkpoints(n_max),
    };
    validate_checkpoints(&cps, n_max)?;
    let table = lag_mean_table(kernel, process, cfg.moment_reps, stream.child(tag::CENTERING))?;
    let expected = table.expected_u_prefixes(n_max);
    let exponent = 1.0 + 1.0 / p;

    let t_rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let path = generate_path(process, n_max, stream.child(tag::REPLICATION).child(r as u64))?;
            let prefixes = u_statistic_prefixes(kernel, &path.values)?;
            Ok(suffix_maxima(&prefixes, &expected, &cps, |m| {
                (m as f64).powf(-exponent)
            }))
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["rep".to_string()];
    columns.extend(cps.iter().map(|c| format!("t_{c}")));
    let mut report = ExperimentReport::new("lln", stream.seed(), columns);
    report.rows = t_rows
        .iter()
        .enumerate()
        .map(|(r, ts)| {
            let mut row = vec![r as f64];
            row.extend_from_slice(ts);
            row
        })
        .collect();

    report.push_summary("p", p);
    report.push_summary("n_max", n_max);
    report.push_summary("replications", reps);
    for (i, c) in cps.iter().enumerate() {
        let ts: Vec<f64> = t_rows.iter().map(|row| row[i]).collect();
        report.push_summary(&format!("t_{c}_median"), median(&ts));
        report.push_summary(&format!("t_{c}_q90"), quantile(&ts, 0.9));
    }
    let base: Vec<f64> = t_rows.iter().map(|row| row[0]).collect();
    for (i, c) in cps.iter().enumerate().skip(1) {
        let ratios: Vec<f64> = t_rows
            .iter()
            .zip(base.iter())
            .map(|(row, &b)| if b > 0.0 { row[i] / b } else { 0.0 })
            .collect();
        report.push_summary(&format!("ratio_{c}_median"), median(&ratios));
        report.push_summary(&format!("ratio_{c}_q90"), quantile(&ratios, 0.9));
    }
    report.runtime = started.elapsed();
    Ok(report)
}

/// `T(N)` values at the checkpoints for one trajectory: a single descending
/// scan keeps the whole computation O(n).
fn suffix_maxima(
    prefixes: &[f64],
    expected: &[f64],
    checkpoints: &[usize],
    weight: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let n_max = prefixes.len() + 1;
    let mut out = vec![0.0; checkpoints.len()];
    let mut next = checkpoints.len();
    let mut running = 0.0f64;
    for m in (2..=n_max).rev() {
        let a = weight(m) * (prefixes[m - 2] - expected[m - 2]).abs();
        running = running.max(a);
        while next > 0 && checkpoints[next - 1] >= m {
            // m just reached this checkpoint going down
            if checkpoints[next - 1] == m {
                out[next - 1] = running;
                next -= 1;
            } else {
                break;
            }
        }
    }
    out
}

/// Per replication: the running sup of the iterated-logarithm statistic at
/// `n_max / 2` and `n_max`; boundedness shows up as quantile stabilization.
pub fn lil_statistic(
    kernel: &PairKernel,
    process: &ShiftProcess,
    n_max: usize,
    reps: usize,
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<ExperimentReport> {
    if n_max < 8 {
        return Err(Error::Argument(format!("n_max must be at least 8, got {n_max}")));
    }
    if reps < 2 {
        return Err(Error::Argument("lil_statistic needs at least 2 replications".into()));
    }
    let started = Instant::now();
    let table = lag_mean_table(kernel, process, cfg.moment_reps, stream.child(tag::CENTERING))?;
    let expected = table.expected_u_prefixes(n_max);
    let half = n_max / 2;

    let rows: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let path = generate_path(process, n_max, stream.child(tag::REPLICATION).child(r as u64))?;
            let prefixes = u_statistic_prefixes(kernel, &path.values)?;
            let mut s_half = 0.0f64;
            let mut s_full = 0.0f64;
            for m in 2..=n_max {
                let a = (prefixes[m - 2] - expected[m - 2]).abs()
                    / ((m as f64).powf(1.5) * ll_function(m as f64).sqrt());
                if m <= half {
                    s_half = s_half.max(a);
                }
                s_full = s_full.max(a);
            }
            Ok((s_half, s_full))
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(
        "lil",
        stream.seed(),
        vec!["rep".into(), "sup_half".into(), "sup_full".into()],
    );
    report.rows = rows
        .iter()
        .enumerate()
        .map(|(r, &(h, f))| vec![r as f64, h, f])
        .collect();
    let halves: Vec<f64> = rows.iter().map(|&(h, _)| h).collect();
    let fulls: Vec<f64> = rows.iter().map(|&(_, f)| f).collect();
    report.push_summary("n_max", n_max);
    report.push_summary("n_half", half);
    report.push_summary("replications", reps);
    for (name, xs) in [("half", &halves), ("full", &fulls)] {
        report.push_summary(&format!("sup_{name}_median"), median(xs));
        report.push_summary(&format!("sup_{name}_q90"), quantile(xs, 0.9));
        report.push_summary(&format!("sup_{name}_q99"), quantile(xs, 0.99));
    }
    let q99_half = quantile(&halves, 0.99);
    let q99_full = quantile(&fulls, 0.99);
    report.push_summary(
        "q99_growth_ratio",
        if q99_half > 0.0 { q99_full / q99_half } else { 0.0 },
    );
    report.runtime = started.elapsed();
    Ok(report)
}

const REMAINDER_NAMES: [&str; 8] = ["r11", "r12", "r2", "r3", "r4", "r5", "r6", "r7"];

/// Normalized remainder magnitudes `n^{-3/2} E |R_{n,k}|` along an increasing
/// `n` grid, with the `R_7` bound `2 n^{-1/2} sum_l l theta_{l,1}`.
pub fn remainder_decay(
    kernel: &PairKernel,
    process: &ShiftProcess,
    n_grid: &[usize],
    l_max: usize,
    reps: usize,
    cfg: &ExperimentConfig,
    stream: RngStream,
) -> Result<ExperimentReport> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("n_grid must be strictly increasing with at least two points".into()));
    }
    if l_max < 1 {
        return Err(Error::Argument("remainders exist for levels >= 1".into()));
    }
    if reps < 2 {
        return Err(Error::Argument("remainder_decay needs at least 2 replications".into()));
    }
    let started = Instant::now();
    let proj_cfg = cfg.projection();
    let mut contexts = Vec::with_capacity(l_max + 1);
    for ell in 0..=l_max {
        contexts.push(build_level_context(kernel, process, ell, &proj_cfg, stream)?);
    }

    // theta_{l,1} for the R_7 bound
    let theta_reps = cfg.moment_reps.clamp(1_000, 50_000);
    let mut weighted_theta = 0.0;
    let mut weighted_theta_se = 0.0;
    for ell in 1..=l_max {
        let t = crate::dependence::theta_coefficient(
            kernel,
            process,
            ell,
            1.0,
            theta_reps,
            cfg.tail_samples,
            stream.child(tag::BOUND).child(ell as u64),
        )?;
        weighted_theta += ell as f64 * t.theta_hat;
        weighted_theta_se += ell as f64 * t.se;
    }

    let mut columns = vec!["n".to_string(), "rep".to_string()];
    columns.extend(REMAINDER_NAMES.iter().map(|s| s.to_string()));
    let mut report = ExperimentReport::new("remainders", stream.seed(), columns);

    let mut per_n_means: Vec<[f64; 8]> = Vec::with_capacity(n_grid.len());
    let mut per_n_ses: Vec<[f64; 8]> = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let values: Vec<[f64; 8]> = (0..reps)
            .into_par_iter()
            .map(|r| -> Result<[f64; 8]> {
                let sub = stream.child(tag::REPLICATION).child(n as u64).child(r as u64);
                let w = process.window_halfwidth();
                let mut lo = 1 - w as i64;
                let mut hi = n as i64 + w as i64;
                for ell in 1..=l_max {
                    let (a, b) = crate::hoeffding::required_span(ell, n);
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                let strip = InnovationStrip::sample(process.innovations, lo, hi, sub.child(tag::PATH))?;
                let mut sums = [0.0f64; 8];
                for ell in 1..=l_max {
                    let (rem, r7) = level_remainders_and_r7(
                        kernel,
                        process,
                        ell,
                        n,
                        &strip,
                        &contexts[ell],
                        &contexts[ell - 1],
                        cfg.tail_samples,
                        sub,
                    )?;
                    for (slot, v) in rem.as_array().into_iter().enumerate() {
                        sums[slot] += v;
                    }
                    sums[7] += r7;
                }
                let scale = (n as f64).powf(-1.5);
                Ok(sums.map(|v| scale * v.abs()))
            })
            .collect::<Result<_>>()?;
        for (r, vals) in values.iter().enumerate() {
            let mut row = vec![n as f64, r as f64];
            row.extend_from_slice(vals);
            report.rows.push(row);
        }
        let mut means = [0.0f64; 8];
        let mut ses = [0.0f64; 8];
        for slot in 0..8 {
            let col: Vec<f64> = values.iter().map(|v| v[slot]).collect();
            let e = mean_se(&col);
            means[slot] = e.value;
            ses[slot] = e.se;
        }
        per_n_means.push(means);
        per_n_ses.push(ses);
    }

    report.push_summary("l_max", l_max);
    report.push_summary("replications", reps);
    report.push_summary("weighted_theta_l1", weighted_theta);
    report.push_summary("weighted_theta_l1_se", weighted_theta_se);
    for (gi, &n) in n_grid.iter().enumerate() {
        for (slot, name) in REMAINDER_NAMES.iter().enumerate() {
            report.push_summary(&format!("mean_{name}_n{n}"), per_n_means[gi][slot]);
            report.push_summary(&format!("se_{name}_n{n}"), per_n_ses[gi][slot]);
        }
        report.push_summary(
            &format!("bound_r7_n{n}"),
            2.0 * weighted_theta / (n as f64).sqrt(),
        );
        report.push_summary(
            &format!("bound_r7_se_n{n}"),
            2.0 * weighted_theta_se / (n as f64).sqrt(),
        );
    }
    for (slot, name) in REMAINDER_NAMES.iter().enumerate() {
        let first = per_n_means.first().unwrap()[slot];
        let last = per_n_means.last().unwrap()[slot];
        report.push_summary(
            &format!("decay_ratio_{name}"),
            if first > 0.0 { last / first } else { 0.0 },
        );
    }
    report.runtime = started.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{coeffs, InnovationSpec, ShiftFunctional};
    use approx::assert_relative_eq;

    fn stream(seed: u64) -> RngStream {
        RngStream::root(seed)
    }

    fn ma1_gaussian() -> ShiftProcess {
        ShiftProcess::new(
            InnovationSpec::Gaussian { mean: 0.0, std: 1.0 },
            ShiftFunctional::linear(coeffs(&[(0, 1.0), (1, 0.5)])),
        )
        .unwrap()
    }

    fn iid_gaussian() -> ShiftProcess {
        ShiftProcess::new(
            InnovationSpec::Gaussian { mean: 0.0, std: 1.0 },
            ShiftFunctional::linear(coeffs(&[(0, 1.0)])),
        )
        .unwrap()
    }

    fn iid_rademacher() -> ShiftProcess {
        ShiftProcess::new(
            InnovationSpec::Rademacher,
            ShiftFunctional::linear(coeffs(&[(0, 1.0)])),
        )
        .unwrap()
    }

    #[test]
    fn ll_examples() {
        assert_eq!(ll_function(0.0), 1.0);
        assert_eq!(ll_function(1.0), 1.0);
        assert_relative_eq!(ll_function(std::f64::consts::E.powf(std::f64::consts::E * std::f64::consts::E)), 2.0, epsilon = 1e-12);
        for x in [0.0, 0.5, 3.0, 100.0, 1e9] {
            assert!(ll_function(x) >= 1.0);
        }
        // nondecreasing on a grid
        let mut prev = 0.0;
        for i in 0..200 {
            let v = ll_function(i as f64);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn y_value_examples() {
        let cfg = ExperimentConfig::default();
        // sum kernel on a centered process: Y = f_l(V)
        let p = ma1_gaussian();
        let window = [0.3, -1.2, 0.8];
        let y = y_value(&PairKernel::sum(), &p, 1, &window, &cfg, stream(1)).unwrap();
        let f = p.truncated(1, &window, 1, stream(0)).unwrap();
        assert_relative_eq!(y, f, epsilon = 1e-12);
        // variance kernel on i.i.d. rademacher: (eps^2 - 1)/2 = 0
        let y = y_value(&PairKernel::variance(), &iid_rademacher(), 0, &[1.0], &cfg, stream(2)).unwrap();
        assert_eq!(y, 0.0);
        // variance kernel on gaussian MA(1) at level W: (X^2 - 1.25)/2
        let window = [0.5, 1.0, -0.7];
        let y = y_value(&PairKernel::variance(), &p, 1, &window, &cfg, stream(3)).unwrap();
        let x = p.eval_window(&window);
        assert_relative_eq!(y, 0.5 * (x * x - 1.25), epsilon = 1e-12);
    }

    #[test]
    fn sigma_squared_iid_gaussian_variance_kernel() {
        // Var((X^2 - 1)/2) = 1/2
        let est = sigma_squared(
            &PairKernel::variance(),
            &iid_gaussian(),
            4,
            100_000,
            4,
            &ExperimentConfig::default(),
            stream(4),
        )
        .unwrap();
        assert!((est.sigma2 - 0.5).abs() < 0.03, "sigma2 {}", est.sigma2);
    }

    #[test]
    fn sigma_squared_ma1_oracles() {
        let cfg = ExperimentConfig::default();
        // variance kernel: sum_k gamma(k)^2 / 2 = 1.03125 by the Wick formula
        let est = sigma_squared(&PairKernel::variance(), &ma1_gaussian(), 6, 200_000, 4, &cfg, stream(5)).unwrap();
        assert!((est.sigma2 - 1.03125).abs() < 0.05 * 1.03125, "sigma2 {}", est.sigma2);
        // sum kernel: sum_k gamma(k) = 1.25 + 2 * 0.5 = 2.25
        let est = sigma_squared(&PairKernel::sum(), &ma1_gaussian(), 6, 200_000, 4, &cfg, stream(6)).unwrap();
        assert!((est.sigma2 - 2.25).abs() < 0.05 * 2.25, "sigma2 {}", est.sigma2);
    }

    #[test]
    fn sigma_squared_stable_in_kmax() {
        let cfg = ExperimentConfig::default();
        let a = sigma_squared(&PairKernel::variance(), &ma1_gaussian(), 6, 100_000, 4, &cfg, stream(7)).unwrap();
        let b = sigma_squared(&PairKernel::variance(), &ma1_gaussian(), 10, 100_000, 4, &cfg, stream(7)).unwrap();
        assert!((a.sigma2 - b.sigma2).abs() <= 3.0 * (a.se + b.se), "{} vs {}", a.sigma2, b.sigma2);
    }

    #[test]
    fn clt_smoke_and_centering() {
        let cfg = ExperimentConfig {
            sigma_path_len: 50_000,
            sigma_reps: 4,
            ..Default::default()
        };
        let report = clt_experiment(&PairKernel::variance(), &ma1_gaussian(), 300, 300, 6, &cfg, stream(8)).unwrap();
        let mean = report.summary_f64("mean_z").unwrap();
        let tol = report.summary_f64("mean_z_tol").unwrap();
        assert!(mean.abs() <= tol, "mean {mean} tol {tol}");
        let var = report.summary_f64("var_z").unwrap();
        assert!((var - 1.03125).abs() < 0.3 * 1.03125, "var {var}");
        assert!(report.summary_f64("ks_distance").unwrap() < 0.15);
    }

    #[test]
    fn clt_classical_recovery_matches_projection_variance() {
        // W = 0 i.i.d. data: the limit variance is Var(h_1(X)) = 1/2 for the
        // variance kernel under gaussian(0,1)
        let cfg = ExperimentConfig {
            sigma_path_len: 50_000,
            sigma_reps: 4,
            ..Default::default()
        };
        let report = clt_experiment(&PairKernel::variance(), &iid_gaussian(), 500, 600, 3, &cfg, stream(9)).unwrap();
        let var = report.summary_f64("var_z").unwrap();
        assert!((var - 0.5).abs() < 0.07 * 0.5 * 2.0, "var {var}"); // generous smoke bound
        let sigma2 = report.summary_f64("sigma2_hat").unwrap();
        assert!((sigma2 - 0.5).abs() < 0.05);
    }

    #[test]
    fn clt_refuses_degenerate_variance() {
        // rademacher + variance kernel: h_1 vanishes on {-1, 1}
        let cfg = ExperimentConfig {
            sigma_path_len: 10_000,
            sigma_reps: 4,
            ..Default::default()
        };
        let err = clt_experiment(&PairKernel::variance(), &iid_rademacher(), 100, 10, 3, &cfg, stream(10));
        assert!(matches!(err, Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn lln_validates_p_and_zero_kernel_is_flat() {
        let cfg = ExperimentConfig::default();
        let err = lln_experiment(&PairKernel::sum(), &ma1_gaussian(), 2.0, 100, None, 4, &cfg, stream(11));
        assert!(err.is_err());

        let zero = PairKernel::custom("zero", |_, _| 0.0);
        let report = lln_experiment(&zero, &ma1_gaussian(), 1.5, 64, Some(&[8, 16, 64]), 4, &cfg, stream(12)).unwrap();
        for row in &report.rows {
            for &t in &row[1..] {
                assert_eq!(t, 0.0);
            }
        }
    }

    #[test]
    fn lln_sum_kernel_reduces_to_partial_sums() {
        // U_m = (m-1) S_m for the sum kernel, so T(N) can be cross-checked
        // against a direct partial-sum implementation
        let cfg = ExperimentConfig::default();
        let p = ma1_gaussian();
        let n_max = 64;
        let cps = [8usize, 32, 64];
        let report = lln_experiment(&PairKernel::sum(), &p, 1.5, n_max, Some(&cps), 3, &cfg, stream(13)).unwrap();
        for (r, row) in report.rows.iter().enumerate() {
            let path = generate_path(&p, n_max, stream(13).child(tag::REPLICATION).child(r as u64)).unwrap();
            let mut running = 0.0;
            let mut a = vec![0.0; n_max + 1];
            for m in 1..=n_max {
                running += path.values[m - 1];
                if m >= 2 {
                    a[m] = ((m - 1) as f64 * running).abs() / (m as f64).powf(1.0 + 1.0 / 1.5);
                }
            }
            for (ci, &cp) in cps.iter().enumerate() {
                let direct = (cp..=n_max).map(|m| a[m]).fold(0.0f64, f64::max);
                assert_relative_eq!(row[ci + 1], direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn lil_zero_kernel_and_reproducibility() {
        let cfg = ExperimentConfig::default();
        let zero = PairKernel::custom("zero", |_, _| 0.0);
        let report = lil_statistic(&zero, &ma1_gaussian(), 64, 4, &cfg, stream(14)).unwrap();
        for row in &report.rows {
            assert_eq!(row[1], 0.0);
            assert_eq!(row[2], 0.0);
        }
        let a = lil_statistic(&PairKernel::variance(), &ma1_gaussian(), 128, 6, &cfg, stream(15)).unwrap();
        let b = lil_statistic(&PairKernel::variance(), &ma1_gaussian(), 128, 6, &cfg, stream(15)).unwrap();
        assert_eq!(a.reproducible_payload(), b.reproducible_payload());
    }

    #[test]
    fn lil_sum_kernel_cross_check() {
        let cfg = ExperimentConfig::default();
        let p = ma1_gaussian();
        let n_max = 64;
        let report = lil_statistic(&PairKernel::sum(), &p, n_max, 3, &cfg, stream(16)).unwrap();
        for (r, row) in report.rows.iter().enumerate() {
            let path = generate_path(&p, n_max, stream(16).child(tag::REPLICATION).child(r as u64)).unwrap();
            let mut running = 0.0;
            let mut s_full = 0.0f64;
            for m in 1..=n_max {
                running += path.values[m - 1];
                if m >= 2 {
                    let a = ((m - 1) as f64 * running).abs()
                        / ((m as f64).powf(1.5) * ll_function(m as f64).sqrt());
                    s_full = s_full.max(a);
                }
            }
            assert_relative_eq!(row[2], s_full, max_relative = 1e-9);
        }
    }

    #[test]
    fn remainders_zero_kernel_all_zero() {
        let cfg = ExperimentConfig {
            moment_reps: 2_000,
            ..Default::default()
        };
        let zero = PairKernel::custom("zero", |_, _| 0.0);
        let report = remainder_decay(&zero, &ma1_gaussian(), &[40, 80], 1, 2, &cfg, stream(17)).unwrap();
        for row in &report.rows {
            for &v in &row[2..] {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn remainders_decay_smoke() {
        let cfg = ExperimentConfig {
            moment_reps: 4_000,
            ..Default::default()
        };
        let p = ShiftProcess::new(
            InnovationSpec::Rademacher,
            ShiftFunctional::linear(coeffs(&[(0, 1.0), (1, 0.5)])),
        )
        .unwrap();
        let report =
            remainder_decay(&PairKernel::variance(), &p, &[100, 400], 1, 24, &cfg, stream(18)).unwrap();
        // every estimated column must fall by at least half over a 4x grid
        for name in REMAINDER_NAMES {
            let ratio = report.summary_f64(&format!("decay_ratio_{name}")).unwrap();
            assert!(ratio < 0.75, "{name}: ratio {ratio}");
        }
    }
}
