//! Dependence coefficients of a kernel/process pair.
//!
//! `theta_{l,p}` is the `L^p` size of the kernel increment when the
//! conditioning window grows from `2l-1` to `2l+1` coordinates, maximized
//! over the lag between the two data points; `delta_l` compares the level-`l`
//! data with the full-width data in `L^2`. Lags beyond `2l+1` need not be
//! scanned: the windows are disjoint there, so the pair law stops depending
//! on the lag.
//!
//! Estimation couples everything on common innovations: one strip per
//! replication feeds both levels and every lag, which removes most of the
//! variance of the difference.

use crate::error::{Error, Result};
use crate::kernels::{KernelForm, PairKernel};
use crate::numeric::{batch_mean_se, Estimate};
use crate::processes::{InnovationStrip, ShiftProcess};
use crate::rng::{tag, RngStream};

const BATCHES: usize = 50;
const MIN_REPS: usize = 30;

/// One lag's estimated `L^p` norm.
#[derive(Clone, Copy, Debug)]
pub struct LagNorm {
    pub lag: usize,
    pub value: f64,
    pub se: f64,
}

/// `theta_{l,p}` estimate: the max over scanned lags.
#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    pub se: f64,
    pub j_star: usize,
    pub per_lag: Vec<LagNorm>,
}

/// `delta_l` estimate (always `p = 2`).
#[derive(Clone, Debug)]
pub struct DeltaEstimate {
    pub delta_hat: f64,
    pub se: f64,
    pub j_star: usize,
    pub per_lag: Vec<LagNorm>,
}

/// Batch-means estimate of `(E |.|^p)^{1/p}` from the sampled `p`-th powers,
/// with a delta-method standard error.
fn lp_norm_from_powers(powers: &[f64], p: f64) -> (f64, f64) {
    let e = batch_mean_se(powers, BATCHES);
    let mean = e.value.max(0.0);
    if mean == 0.0 {
        return (0.0, if e.se == 0.0 { 0.0 } else { e.se.powf(1.0 / p) });
    }
    let value = mean.powf(1.0 / p);
    let se = e.se * mean.powf(1.0 / p - 1.0) / p;
    (value, se)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::Argument(format!(
            "at least {MIN_REPS} replications are required for a meaningful confidence interval, got {reps}"
        )));
    }
    Ok(())
}

fn argmax(norms: &[LagNorm]) -> usize {
    norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.partial_cmp(&b.1.value).expect("finite norms"))
        .map(|(i, _)| i)
        .expect("non-empty lag scan")
}

/// Per-lag `L^p` norms of the level increment
/// `h(f_l(V_0), f_l(V_j)) - h(f_{l-1}(V_0), f_{l-1}(V_j))`
/// (plain `h(f_0(V_0), f_0(V_j))` at level zero).
pub fn theta_lag_norms(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    p: f64,
    lags: &[usize],
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<Vec<LagNorm>> {
    if p < 1.0 {
        return Err(Error::Argument(format!("p must be >= 1, got {p}")));
    }
    check_reps(reps)?;
    let max_lag = lags.iter().copied().max().unwrap_or(0) as i64;
    let l = ell as i64;
    let mut powers: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); lags.len()];
    for r in 0..reps {
        let sub = stream.child(tag::REPLICATION).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -l, max_lag + l, sub.child(0))?;
        let f0_top = process.truncated(ell, strip.window(0, ell), tail_samples, sub.child(1))?;
        let f0_low = if ell > 0 {
            Some(process.truncated(ell - 1, strip.window(0, ell - 1), tail_samples, sub.child(2))?)
        } else {
            None
        };
        for (slot, &lag) in lags.iter().enumerate() {
            let lsub = sub.child(tag::LAG).child(lag as u64);
            let fj_top = process.truncated(ell, strip.window(lag as i64, ell), tail_samples, lsub.child(1))?;
            let diff = match f0_low {
                None => kernel.evaluate(f0_top, fj_top),
                Some(f0_low) => {
                    let fj_low =
                        process.truncated(ell - 1, strip.window(lag as i64, ell - 1), tail_samples, lsub.child(2))?;
                    kernel.evaluate(f0_top, fj_top) - kernel.evaluate(f0_low, fj_low)
                }
            };
            if !diff.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite kernel increment at level {ell}, lag {lag}"
                )));
            }
            powers[slot].push(diff.abs().powf(p));
        }
    }
    Ok(lags
        .iter()
        .zip(powers.iter())
        .map(|(&lag, pw)| {
            let (value, se) = lp_norm_from_powers(pw, p);
            LagNorm { lag, value, se }
        })
        .collect())
}

/// `theta_{l,p}`: the sup over lags `0..=2l+1` of the increment norms.
pub fn theta_coefficient(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    p: f64,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<ThetaEstimate> {
    let lags: Vec<usize> = (0..=2 * ell + 1).collect();
    let per_lag = theta_lag_norms(kernel, process, ell, p, &lags, reps, tail_samples, stream)?;
    let best = argmax(&per_lag);
    Ok(ThetaEstimate {
        theta_hat: per_lag[best].value,
        se: per_lag[best].se,
        j_star: per_lag[best].lag,
        per_lag,
    })
}

/// `delta_l`: `L^2` distance between the full-width data pair and the
/// level-`l` data pair, sup over lags `0..=2W+1`.
pub fn delta_coefficient(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<DeltaEstimate> {
    check_reps(reps)?;
    let w = process.window_halfwidth();
    let lags: Vec<usize> = (0..=2 * w + 1).collect();
    let max_lag = *lags.last().unwrap() as i64;
    let hw = w.max(ell) as i64;
    let mut powers: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); lags.len()];
    for r in 0..reps {
        let sub = stream.child(tag::REPLICATION).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -hw, max_lag + hw, sub.child(0))?;
        let x0 = process.eval_window(strip.window(0, w));
        let f0 = process.truncated(ell, strip.window(0, ell), tail_samples, sub.child(1))?;
        for (slot, &lag) in lags.iter().enumerate() {
            let lsub = sub.child(tag::LAG).child(lag as u64);
            let xl = process.eval_window(strip.window(lag as i64, w));
            let fl = process.truncated(ell, strip.window(lag as i64, ell), tail_samples, lsub.child(1))?;
            let diff = kernel.evaluate(x0, xl) - kernel.evaluate(f0, fl);
            powers[slot].push(diff * diff);
        }
    }
    let per_lag: Vec<LagNorm> = lags
        .iter()
        .zip(powers.iter())
        .map(|(&lag, pw)| {
            let (value, se) = lp_norm_from_powers(pw, 2.0);
            LagNorm { lag, value, se }
        })
        .collect();
    let best = argmax(&per_lag);
    Ok(DeltaEstimate {
        delta_hat: per_lag[best].value,
        se: per_lag[best].se,
        j_star: per_lag[best].lag,
        per_lag,
    })
}

/// `D_r = f_l(V_0) - f_{l-1}(V_0)` over fresh windows.
fn truncation_increments(
    process: &ShiftProcess,
    ell: usize,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    let l = ell as i64;
    let mut out = Vec::with_capacity(reps);
    for r in 0..reps {
        let sub = stream.child(tag::REPLICATION).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -l, l, sub.child(0))?;
        let top = process.truncated(ell, strip.window(0, ell), tail_samples, sub.child(1))?;
        let low = process.truncated(ell - 1, strip.window(0, ell - 1), tail_samples, sub.child(2))?;
        out.push(top - low);
    }
    Ok(out)
}

/// Uniform-continuity bound `2 ||omega(|f_l(V) - f_{l-1}(V)|)||_p` with
/// `omega(t) = c t^alpha`, i.e. `2 c (E |D|^{p alpha})^{1/p}`.
pub fn holder_theta_bound(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    p: f64,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<Estimate> {
    let Some(holder) = kernel.holder() else {
        return Err(Error::Argument(format!(
            "kernel `{}` carries no Holder modulus",
            kernel.name()
        )));
    };
    if ell == 0 {
        return Err(Error::Argument(
            "the Holder bound compares levels l and l-1; l must be >= 1".into(),
        ));
    }
    check_reps(reps)?;
    let diffs = truncation_increments(process, ell, reps, tail_samples, stream)?;
    let q = p * holder.exponent;
    let powers: Vec<f64> = diffs.iter().map(|d| d.abs().powf(q)).collect();
    let e = batch_mean_se(&powers, BATCHES);
    let mean = e.value.max(0.0);
    if mean == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    Ok(Estimate {
        value: 2.0 * holder.constant * mean.powf(1.0 / p),
        se: 2.0 * holder.constant * e.se * mean.powf(1.0 / p - 1.0) / p,
    })
}

/// The two variance-kernel bounds: the printed form
/// `2 ||X_0||_{2p} ||D||_p` and the proof-consistent form
/// `2 ||X_0||_{2p} sup_j ||D_0 - D_j||_{2p}`, where
/// `D_k = f_l(V_k) - f_{l-1}(V_k)`. The second is the inequality the
/// derivation actually establishes; acceptance checks use it.
#[derive(Clone, Copy, Debug)]
pub struct VarianceThetaBound {
    pub printed: Estimate,
    pub proof: Estimate,
}

pub fn variance_kernel_theta_bound(
    process: &ShiftProcess,
    ell: usize,
    p: f64,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<VarianceThetaBound> {
    if ell == 0 {
        return Err(Error::Argument(
            "the variance bound compares levels l and l-1; l must be >= 1".into(),
        ));
    }
    check_reps(reps)?;
    let w = process.window_halfwidth();
    let two_p = 2.0 * p;

    // ||X_0||_{2p}
    let mut x_pow = Vec::with_capacity(reps);
    for r in 0..reps {
        let sub = stream.child(tag::MOMENTS).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -(w as i64), w as i64, sub)?;
        let x = process.eval_window(strip.window(0, w));
        x_pow.push(x.abs().powf(two_p));
    }
    let (x_norm, x_se) = lp_norm_from_powers(&x_pow, two_p);

    // ||D||_p and sup_j ||D_0 - D_j||_{2p} on coupled strips
    let l = ell as i64;
    let lags: Vec<usize> = (1..=2 * ell + 1).collect();
    let max_lag = *lags.last().unwrap() as i64;
    let mut d_pow = Vec::with_capacity(reps);
    let mut pair_pows: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); lags.len()];
    for r in 0..reps {
        let sub = stream.child(tag::BOUND).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -l, max_lag + l, sub.child(0))?;
        let d_at = |center: i64, csub: RngStream| -> Result<f64> {
            let top = process.truncated(ell, strip.window(center, ell), tail_samples, csub.child(1))?;
            let low = process.truncated(ell - 1, strip.window(center, ell - 1), tail_samples, csub.child(2))?;
            Ok(top - low)
        };
        let d0 = d_at(0, sub.child(1))?;
        d_pow.push(d0.abs().powf(p));
        for (slot, &lag) in lags.iter().enumerate() {
            let dj = d_at(lag as i64, sub.child(tag::LAG).child(lag as u64))?;
            pair_pows[slot].push((d0 - dj).abs().powf(two_p));
        }
    }
    let (d_norm, d_se) = lp_norm_from_powers(&d_pow, p);
    let printed = Estimate {
        value: 2.0 * x_norm * d_norm,
        se: 2.0 * (x_norm * d_se + d_norm * x_se),
    };
    let mut best = (0.0f64, 0.0f64);
    for pw in &pair_pows {
        let (v, s) = lp_norm_from_powers(pw, two_p);
        if v > best.0 {
            best = (v, s);
        }
    }
    let proof = Estimate {
        value: 2.0 * x_norm * best.0,
        se: 2.0 * (x_norm * best.1 + best.0 * x_se),
    };
    Ok(VarianceThetaBound { printed, proof })
}

/// `theta` estimates across levels `0..=L`.
#[derive(Clone, Debug)]
pub struct ProfileEntry {
    pub ell: usize,
    pub theta_hat: f64,
    pub se: f64,
    pub j_star: usize,
}

#[derive(Clone, Debug)]
pub struct DependenceProfile {
    pub p: f64,
    pub entries: Vec<ProfileEntry>,
    /// halfwidth of the generating functional
    pub window_halfwidth: usize,
}

impl DependenceProfile {
    /// Cumulative sums `sum_{l <= L} w(l) theta_hat_l`.
    pub fn weighted_partial_sums(&self, weight: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut acc = 0.0;
        self.entries
            .iter()
            .map(|e| {
                acc += weight(e.ell) * e.theta_hat;
                acc
            })
            .collect()
    }

    pub fn max_ell(&self) -> usize {
        self.entries.last().map_or(0, |e| e.ell)
    }
}

pub fn dependence_profile(
    kernel: &PairKernel,
    process: &ShiftProcess,
    l_max: usize,
    p: f64,
    reps: usize,
    tail_samples: usize,
    stream: RngStream,
) -> Result<DependenceProfile> {
    let mut entries = Vec::with_capacity(l_max + 1);
    for ell in 0..=l_max {
        let est = theta_coefficient(
            kernel,
            process,
            ell,
            p,
            reps,
            tail_samples,
            stream.child(tag::LEVEL).child(ell as u64),
        )?;
        entries.push(ProfileEntry {
            ell,
            theta_hat: est.theta_hat,
            se: est.se,
            j_star: est.j_star,
        });
    }
    Ok(DependenceProfile {
        p,
        entries,
        window_halfwidth: process.window_halfwidth(),
    })
}

/// Which theorem's summability hypothesis to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TheoremHypothesis {
    /// `sum_l l^{1-1/p} theta_{l,p} < inf`, `p` in [1, 2)
    Lln { p: f64 },
    /// `theta_{0,2} + sum_l l^{1/2} theta_{l,2} < inf`
    Lil,
    /// `sum_l l^{1/2} theta_{l,2}` for a p = 2 profile,
    /// `sum_l l^2 theta_{l,1}` for a p = 1 profile
    Clt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// finite-window functional: the tail is exactly zero
    FiniteExact,
    Plateau,
    NonPlateau,
}

#[derive(Clone, Debug)]
pub struct SummabilityReport {
    pub weight_exponent: f64,
    pub weight_at_zero: f64,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
}

pub fn summability_report(profile: &DependenceProfile, theorem: TheoremHypothesis) -> Result<SummabilityReport> {
    let (exponent, w0) = match theorem {
        TheoremHypothesis::Lln { p } => {
            if !(1.0..2.0).contains(&p) {
                return Err(Error::Argument(format!("p in [1,2) required, got {p}")));
            }
            if (profile.p - p).abs() > 1e-12 {
                return Err(Error::Argument(format!(
                    "profile was estimated at p = {}, hypothesis needs p = {p}",
                    profile.p
                )));
            }
            (1.0 - 1.0 / p, 1.0)
        }
        TheoremHypothesis::Lil => {
            if (profile.p - 2.0).abs() > 1e-12 {
                return Err(Error::Argument(
                    "the iterated-logarithm bound needs a p = 2 profile".into(),
                ));
            }
            (0.5, 1.0)
        }
        TheoremHypothesis::Clt => {
            if (profile.p - 1.0).abs() <= 1e-12 {
                (2.0, 0.0)
            } else if (profile.p - 2.0).abs() <= 1e-12 {
                (0.5, 0.0)
            } else {
                return Err(Error::Argument(format!(
                    "the CLT hypotheses use p = 1 or p = 2 profiles, got p = {}",
                    profile.p
                )));
            }
        }
    };
    let weight = |ell: usize| if ell == 0 { w0 } else { (ell as f64).powf(exponent) };
    let partial_sums = profile.weighted_partial_sums(weight);

    let w = profile.window_halfwidth;
    let tail_exact_zero = profile.max_ell() > w
        && profile
            .entries
            .iter()
            .filter(|e| e.ell > w)
            .all(|e| e.theta_hat == 0.0);
    let verdict = if tail_exact_zero {
        Verdict::FiniteExact
    } else if partial_sums.len() >= 4 {
        // plateau: the last quarter of levels adds no more than 2% plus noise
        let anchor_idx = (partial_sums.len() * 3) / 4 - 1;
        let last = *partial_sums.last().unwrap();
        let anchor = partial_sums[anchor_idx];
        let tail_se: f64 = profile
            .entries
            .iter()
            .skip(anchor_idx + 1)
            .map(|e| weight(e.ell) * e.se)
            .sum();
        if (last - anchor).abs() <= 0.02 * last.abs().max(f64::MIN_POSITIVE) + 3.0 * tail_se {
            Verdict::Plateau
        } else {
            Verdict::NonPlateau
        }
    } else {
        Verdict::NonPlateau
    };
    Ok(SummabilityReport {
        weight_exponent: exponent,
        weight_at_zero: w0,
        partial_sums,
        verdict,
    })
}

/// Which analytic bounds apply to a kernel: `(holder, variance)`.
pub fn bounds_available(kernel: &PairKernel) -> (bool, bool) {
    (kernel.holder().is_some(), kernel.form() == KernelForm::Variance)
}
