//! Innovation streams and shift functionals.
//!
//! A process is `X_j = f((eps_{j-k})_{|k| <= W})` for an i.i.d. scalar
//! innovation sequence `eps` and a functional `f` with finite halfwidth `W`.
//! The conditional truncation `f_l` is the expectation of `f` given the
//! central `2l+1` innovations: exact for linear functionals, Monte Carlo over
//! resampled tail coordinates otherwise, and identical to `f` once `l >= W`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::numeric::Kahan;
use crate::rng::RngStream;

/// Scalar innovation distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnovationSpec {
    /// +1 or -1 with probability 1/2 each.
    Rademacher,
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationSpec::Rademacher => Ok(()),
            InnovationSpec::Gaussian { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || std <= 0.0 {
                    Err(Error::Config(format!(
                        "gaussian innovations need finite mean and std > 0, got mean={mean}, std={std}"
                    )))
                } else {
                    Ok(())
                }
            }
            InnovationSpec::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    Err(Error::Config(format!(
                        "uniform innovations need finite lo < hi, got lo={lo}, hi={hi}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InnovationSpec::Rademacher => 0.0,
            InnovationSpec::Gaussian { mean, .. } => mean,
            InnovationSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InnovationSpec::Rademacher => 1.0,
            InnovationSpec::Gaussian { std, .. } => std * std,
            InnovationSpec::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    fn fill(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match *self {
            InnovationSpec::Rademacher => {
                for v in out.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            InnovationSpec::Gaussian { mean, std } => {
                let dist = Normal::new(mean, std).expect("validated");
                for v in out.iter_mut() {
                    *v = dist.sample(rng);
                }
            }
            InnovationSpec::Uniform { lo, hi } => {
                let dist = Uniform::new(lo, hi).expect("validated");
                for v in out.iter_mut() {
                    *v = dist.sample(rng);
                }
            }
        }
    }
}

/// Draw `count` i.i.d. innovations. Identical `(spec, count, stream)` yields
/// identical output.
pub fn sample_innovations(spec: InnovationSpec, count: usize, stream: RngStream) -> Result<Vec<f64>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Argument("innovation count must be >= 1".into()));
    }
    let mut out = vec![0.0; count];
    spec.fill(&mut stream.rng(), &mut out);
    Ok(out)
}

/// The measurable map applied to an innovation window.
#[derive(Clone)]
pub enum ShiftFunctional {
    /// `f(v) = sum_{|i| <= W} a_i v_i`, offsets keyed by `i`.
    Linear { coeffs: BTreeMap<i64, f64> },
    /// Arbitrary pure function of a `(2W+1)`-window.
    Custom {
        halfwidth: usize,
        evaluator: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for ShiftFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftFunctional::Linear { coeffs } => f.debug_struct("Linear").field("coeffs", coeffs).finish(),
            ShiftFunctional::Custom { halfwidth, .. } => f
                .debug_struct("Custom")
                .field("halfwidth", halfwidth)
                .finish_non_exhaustive(),
        }
    }
}

impl ShiftFunctional {
    pub fn linear(coeffs: BTreeMap<i64, f64>) -> Self {
        ShiftFunctional::Linear { coeffs }
    }

    pub fn custom<F>(halfwidth: usize, evaluator: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ShiftFunctional::Custom {
            halfwidth,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn halfwidth(&self) -> usize {
        match self {
            ShiftFunctional::Linear { coeffs } => coeffs
                .keys()
                .map(|&k| k.unsigned_abs() as usize)
                .max()
                .unwrap_or(0),
            ShiftFunctional::Custom { halfwidth, .. } => *halfwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ShiftFunctional::Linear { coeffs } = self {
            for (&off, &a) in coeffs {
                if !a.is_finite() {
                    return Err(Error::Config(format!("non-finite coefficient at offset {off}")));
                }
            }
        }
        Ok(())
    }
}

/// Innovation distribution plus shift functional.
#[derive(Clone, Debug)]
pub struct ShiftProcess {
    pub innovations: InnovationSpec,
    pub functional: ShiftFunctional,
}

impl ShiftProcess {
    pub fn new(innovations: InnovationSpec, functional: ShiftFunctional) -> Result<Self> {
        innovations.validate()?;
        functional.validate()?;
        Ok(ShiftProcess { innovations, functional })
    }

    pub fn window_halfwidth(&self) -> usize {
        self.functional.halfwidth()
    }

    /// Evaluate `f` on a full `(2W+1)`-window centered at index `W`.
    pub fn eval_window(&self, window: &[f64]) -> f64 {
        let w = self.window_halfwidth();
        debug_assert_eq!(window.len(), 2 * w + 1);
        match &self.functional {
            ShiftFunctional::Linear { coeffs } => {
                let mut acc = 0.0;
                for (&off, &a) in coeffs {
                    acc += a * window[(w as i64 - off) as usize];
                }
                acc
            }
            ShiftFunctional::Custom { evaluator, .. } => evaluator(window),
        }
    }

    /// `f_l(window) = E[f | central 2l+1 coordinates]`.
    ///
    /// Linear functionals are exact (the unseen tail contributes its mean);
    /// custom functionals with `l < W` average the evaluator over
    /// `tail_samples` fresh tails; `l >= W` evaluates `f` directly, bit-exactly.
    pub fn truncated(
        &self,
        ell: usize,
        window: &[f64],
        tail_samples: usize,
        stream: RngStream,
    ) -> Result<f64> {
        if window.len() != 2 * ell + 1 {
            return Err(Error::Argument(format!(
                "window length {} does not match 2*{ell}+1",
                window.len()
            )));
        }
        let w = self.window_halfwidth();
        match &self.functional {
            ShiftFunctional::Linear { coeffs } => {
                // Same coefficient iteration order as eval_window, so f_l with
                // l >= W reproduces f bit-for-bit.
                let eps_mean = self.innovations.mean();
                let mut acc = 0.0;
                let mut tail = 0.0;
                for (&off, &a) in coeffs {
                    if off.unsigned_abs() as usize <= ell {
                        acc += a * window[(ell as i64 - off) as usize];
                    } else {
                        tail += a;
                    }
                }
                Ok(acc + tail * eps_mean)
            }
            ShiftFunctional::Custom { evaluator, .. } => {
                if ell >= w {
                    let lo = ell - w;
                    Ok(evaluator(&window[lo..lo + 2 * w + 1]))
                } else {
                    if tail_samples == 0 {
                        return Err(Error::Argument("tail_samples must be >= 1".into()));
                    }
                    let mut rng = stream.rng();
                    let mut full = vec![0.0; 2 * w + 1];
                    full[(w - ell)..=(w + ell)].copy_from_slice(window);
                    let mut acc = Kahan::new();
                    for _ in 0..tail_samples {
                        self.innovations.fill(&mut rng, &mut full[..(w - ell)]);
                        self.innovations.fill(&mut rng, &mut full[(w + ell + 1)..]);
                        acc.add(evaluator(&full));
                    }
                    Ok(acc.value() / tail_samples as f64)
                }
            }
        }
    }

    /// `E f_l(V)` for linear functionals (independent of `l`), `None` otherwise.
    pub fn level_mean(&self, _ell: usize) -> Option<f64> {
        match &self.functional {
            ShiftFunctional::Linear { coeffs } => {
                let s: f64 = coeffs.values().sum();
                Some(s * self.innovations.mean())
            }
            ShiftFunctional::Custom { .. } => None,
        }
    }

    /// `Cov(f_l(V_0), f_l(V_lag))` for linear functionals, `None` otherwise.
    /// `lag = 0` gives the variance of the truncated process.
    pub fn level_cov(&self, ell: usize, lag: usize) -> Option<f64> {
        match &self.functional {
            ShiftFunctional::Linear { coeffs } => {
                let keep = ell.min(self.window_halfwidth()) as i64;
                let var = self.innovations.variance();
                let mut acc = 0.0;
                for (&i, &ai) in coeffs {
                    if i.abs() > keep {
                        continue;
                    }
                    let j = i + lag as i64;
                    if j.abs() <= keep {
                        if let Some(&aj) = coeffs.get(&j) {
                            acc += ai * aj;
                        }
                    }
                }
                Some(acc * var)
            }
            ShiftFunctional::Custom { .. } => None,
        }
    }
}

/// Contiguous innovation slice indexed by absolute position.
#[derive(Clone, Debug)]
pub struct InnovationStrip {
    first: i64,
    values: Vec<f64>,
}

impl InnovationStrip {
    /// Sample innovations covering positions `lo..=hi`.
    pub fn sample(spec: InnovationSpec, lo: i64, hi: i64, stream: RngStream) -> Result<Self> {
        spec.validate()?;
        if hi < lo {
            return Err(Error::Argument(format!("empty strip range {lo}..={hi}")));
        }
        let mut values = vec![0.0; (hi - lo + 1) as usize];
        spec.fill(&mut stream.rng(), &mut values);
        Ok(InnovationStrip { first: lo, values })
    }

    pub fn from_values(first: i64, values: Vec<f64>) -> Self {
        InnovationStrip { first, values }
    }

    pub fn first_index(&self) -> i64 {
        self.first
    }

    pub fn last_index(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.first && hi <= self.last_index()
    }

    pub fn get(&self, index: i64) -> f64 {
        self.values[(index - self.first) as usize]
    }

    /// The `(2*halfwidth+1)`-window centered at `center`.
    pub fn window(&self, center: i64, halfwidth: usize) -> &[f64] {
        let lo = center - halfwidth as i64;
        let hi = center + halfwidth as i64;
        assert!(
            self.covers(lo, hi),
            "window [{lo}, {hi}] outside strip [{}, {}]",
            self.first,
            self.last_index()
        );
        let off = (lo - self.first) as usize;
        &self.values[off..off + 2 * halfwidth + 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A realized path `X_1..X_n` with the innovations that produced it.
#[derive(Clone, Debug)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub innovations: InnovationStrip,
    pub seed: u64,
    pub process: ShiftProcess,
}

/// Simulate `X_1..X_n`; the innovation strip covers `1-W..=n+W` so every value
/// is recomputable from it bit-exactly.
pub fn generate_path(process: &ShiftProcess, n: usize, stream: RngStream) -> Result<SamplePath> {
    if n < 2 {
        return Err(Error::Argument(format!("path length must be >= 2, got {n}")));
    }
    let w = process.window_halfwidth() as i64;
    let strip = InnovationStrip::sample(process.innovations, 1 - w, n as i64 + w, stream)?;
    let values = (1..=n as i64)
        .map(|j| process.eval_window(strip.window(j, w as usize)))
        .collect();
    Ok(SamplePath {
        values,
        innovations: strip,
        seed: stream.seed(),
        process: process.clone(),
    })
}

/// Convenience constructor for linear coefficient maps.
pub fn coeffs(entries: &[(i64, f64)]) -> BTreeMap<i64, f64> {
    entries.iter().copied().collect()
}
