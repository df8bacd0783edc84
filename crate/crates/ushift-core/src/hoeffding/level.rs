//! Level kernels and their conditional projections.
//!
//! The level-`l` difference kernel on pairs of `(2l+1)`-windows is
//!
//! ```text
//! htilde(v, w) = h(f_l(v), f_l(w)) - h(f_{l-1}(v°), f_{l-1}(w°)),   l >= 1
//! htilde(v, w) = h(f_0(v), f_0(w)),                                 l = 0
//! ```
//!
//! where `v°` drops the outermost coordinate on each side. The projection
//! `g_l(x) = E h(x, f_l(V'))` and the lag means `nu_l(k) = E h(X_0^l, X_k^l)`
//! are exact for the built-in kernel forms on linear processes, and Monte
//! Carlo (estimated once, then reused everywhere) otherwise.

use crate::error::{Error, Result};
use crate::kernels::{KernelForm, PairKernel};
use crate::numeric::Kahan;
use crate::processes::{InnovationStrip, ShiftProcess};
use crate::rng::{tag, RngStream};

/// The level-`l` difference kernel.
#[derive(Clone, Debug)]
pub struct LevelKernel {
    pub kernel: PairKernel,
    pub process: ShiftProcess,
    pub ell: usize,
    /// Monte Carlo budget for each conditional truncation of a custom
    /// functional.
    pub tail_samples: usize,
}

pub fn level_kernel(kernel: &PairKernel, process: &ShiftProcess, ell: usize, tail_samples: usize) -> LevelKernel {
    LevelKernel {
        kernel: kernel.clone(),
        process: process.clone(),
        ell,
        tail_samples,
    }
}

impl LevelKernel {
    pub fn window_len(&self) -> usize {
        2 * self.ell + 1
    }

    /// `f_l = f_{l-1} = f` once `l` exceeds the functional's halfwidth, so the
    /// difference kernel vanishes identically.
    pub fn is_identically_zero(&self) -> bool {
        self.ell > self.process.window_halfwidth()
    }

    /// Evaluate `htilde` on two `(2l+1)`-windows.
    pub fn evaluate(&self, v: &[f64], w: &[f64], stream: RngStream) -> Result<f64> {
        let len = self.window_len();
        if v.len() != len || w.len() != len {
            return Err(Error::Argument(format!(
                "level-{} kernel expects windows of length {len}, got {} and {}",
                self.ell,
                v.len(),
                w.len()
            )));
        }
        let m = self.tail_samples;
        let fl_v = self.process.truncated(self.ell, v, m, stream.child(tag::TAIL).child(1))?;
        let fl_w = self.process.truncated(self.ell, w, m, stream.child(tag::TAIL).child(2))?;
        let top = self.kernel.evaluate(fl_v, fl_w);
        if self.ell == 0 {
            return Ok(top);
        }
        let inner = 1..(2 * self.ell);
        let fp_v = self
            .process
            .truncated(self.ell - 1, &v[inner.clone()], m, stream.child(tag::TAIL).child(3))?;
        let fp_w = self
            .process
            .truncated(self.ell - 1, &w[inner], m, stream.child(tag::TAIL).child(4))?;
        Ok(top - self.kernel.evaluate(fp_v, fp_w))
    }
}

/// Lag means of the single-level kernel `h(f_l(V_0), f_l(V_lag))`: close lags
/// (overlapping windows) are stored, disjoint windows share the constant
/// `nu_inf = E h(f_l(V), f_l(V'))`.
#[derive(Clone, Debug)]
pub(crate) struct LevelMoments {
    pub nu_close: Vec<f64>,
    pub nu_inf: f64,
}

impl LevelMoments {
    pub fn nu(&self, lag: usize) -> f64 {
        debug_assert!(lag >= 1);
        if lag <= self.nu_close.len() {
            self.nu_close[lag - 1]
        } else {
            self.nu_inf
        }
    }
}

/// One-argument projection `g_l(x) = E h(x, f_l(V'))`.
#[derive(Clone)]
pub(crate) enum Projection {
    Moment {
        form: KernelForm,
        mean_f: f64,
        mean_f_sq: f64,
    },
    Ensemble {
        kernel: PairKernel,
        draws: Vec<f64>,
    },
}

impl Projection {
    pub fn g(&self, x: f64) -> f64 {
        match self {
            Projection::Moment { form, mean_f, mean_f_sq } => match form {
                KernelForm::Variance => 0.5 * (x * x - 2.0 * x * mean_f + mean_f_sq),
                KernelForm::Sum => x + mean_f,
                KernelForm::Product => x * mean_f,
                KernelForm::Custom => unreachable!("moment projection is only built for closed forms"),
            },
            Projection::Ensemble { kernel, draws } => {
                let mut acc = Kahan::new();
                for &e in draws {
                    acc.add(kernel.evaluate(x, e));
                }
                acc.value() / draws.len() as f64
            }
        }
    }
}

/// Everything level-specific the decomposition reuses: the projection and the
/// lag means, estimated once.
#[derive(Clone)]
pub(crate) struct LevelContext {
    pub proj: Projection,
    pub moments: LevelMoments,
}

/// Estimation budgets for the non-analytic paths.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionConfig {
    pub tail_samples: usize,
    pub moment_reps: usize,
    pub ensemble_size: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            tail_samples: 4096,
            moment_reps: 100_000,
            ensemble_size: 4096,
        }
    }
}

pub(crate) fn build_level_context(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    cfg: &ProjectionConfig,
    stream: RngStream,
) -> Result<LevelContext> {
    let close_lags = 2 * ell;
    // analytic moments for built-in kernel forms on linear functionals
    if kernel.form() != KernelForm::Custom {
        if let (Some(mean_f), Some(var_f)) = (process.level_mean(ell), process.level_cov(ell, 0)) {
            let mean_f_sq = var_f + mean_f * mean_f;
            let nu_of_cov = |cov: f64| match kernel.form() {
                KernelForm::Variance => var_f - cov,
                KernelForm::Sum => 2.0 * mean_f,
                KernelForm::Product => cov + mean_f * mean_f,
                KernelForm::Custom => unreachable!(),
            };
            let nu_close = (1..=close_lags)
                .map(|lag| nu_of_cov(process.level_cov(ell, lag).expect("linear")))
                .collect();
            return Ok(LevelContext {
                proj: Projection::Moment {
                    form: kernel.form(),
                    mean_f,
                    mean_f_sq,
                },
                moments: LevelMoments {
                    nu_close,
                    nu_inf: nu_of_cov(0.0),
                },
            });
        }
    }

    let reps = cfg.moment_reps.max(2);
    let m = cfg.tail_samples;
    let sub = stream.child(tag::MOMENTS).child(ell as u64);

    if kernel.form() != KernelForm::Custom {
        // custom process, closed-form kernel: the projection only needs the
        // marginal moments of f_l and the close-lag cross moments
        let mut mean_acc = Kahan::new();
        let mut sq_acc = Kahan::new();
        let mut cross_acc = vec![Kahan::new(); close_lags];
        for r in 0..reps {
            let rsub = sub.child(tag::REPLICATION).child(r as u64);
            let strip = InnovationStrip::sample(process.innovations, -(ell as i64), 3 * ell as i64, rsub.child(0))?;
            let x0 = process.truncated(ell, strip.window(0, ell), m, rsub.child(1))?;
            // an independent second truncation of the same window keeps
            // E[x0 * x0b] unbiased for E f_l(V)^2
            let x0b = process.truncated(ell, strip.window(0, ell), m, rsub.child(2))?;
            mean_acc.add(x0);
            sq_acc.add(x0 * x0b);
            for lag in 1..=close_lags {
                let xl = process.truncated(ell, strip.window(lag as i64, ell), m, rsub.child(2 + lag as u64))?;
                cross_acc[lag - 1].add(x0 * xl);
            }
        }
        let mean_f = mean_acc.value() / reps as f64;
        let mean_f_sq = sq_acc.value() / reps as f64;
        let var_f = mean_f_sq - mean_f * mean_f;
        let nu_of_cov = |cov: f64| match kernel.form() {
            KernelForm::Variance => var_f - cov,
            KernelForm::Sum => 2.0 * mean_f,
            KernelForm::Product => cov + mean_f * mean_f,
            KernelForm::Custom => unreachable!(),
        };
        let nu_close = cross_acc
            .iter()
            .map(|acc| nu_of_cov(acc.value() / reps as f64 - mean_f * mean_f))
            .collect();
        return Ok(LevelContext {

            proj: Projection::Moment {
                form: kernel.form(),
                mean_f,
                mean_f_sq,
            },
            moments: LevelMoments {
                nu_close,
                nu_inf: nu_of_cov(0.0),
            },
        });
    }

    // fully generic: an ensemble of f_l(V') draws backs the projection
    let size = cfg.ensemble_size.max(2);
    let mut draws = Vec::with_capacity(size);
    for r in 0..size {
        let rsub = sub.child(tag::ENSEMBLE).child(r as u64);
        let strip = InnovationStrip::sample(process.innovations, -(ell as i64), ell as i64, rsub.child(0))?;
        draws.push(process.truncated(ell, strip.window(0, ell), m, rsub.child(1))?);
    }
    let mut pair_acc = Kahan::new();
    for t in 0..size / 2 {
        pair_acc.add(kernel.evaluate(draws[2 * t], draws[2 * t + 1]));
    }
    let nu_inf = pair_acc.value() / (size / 2) as f64;
    let mut nu_close = vec![0.0; close_lags];
    for (lag, slot) in nu_close.iter_mut().enumerate() {
        let lag = lag + 1;
        let mut acc = Kahan::new();
        for r in 0..reps {
            let rsub = sub.child(tag::LAG).child(lag as u64).child(r as u64);
            let strip = InnovationStrip::sample(process.innovations, -(ell as i64), 3 * ell as i64, rsub.child(0))?;
            let x0 = process.truncated(ell, strip.window(0, ell), m, rsub.child(1))?;
            let xl = process.truncated(ell, strip.window(lag as i64, ell), m, rsub.child(2))?;
            acc.add(kernel.evaluate(x0, xl));
        }
        *slot = acc.value() / reps as f64;
    }
    Ok(LevelContext {

        proj: Projection::Ensemble {
            kernel: kernel.clone(),
            draws,
        },
        moments: LevelMoments { nu_close, nu_inf },
    })
}
