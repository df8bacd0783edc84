//! Symmetric pair kernels and their Hoeffding projections.
//!
//! A kernel is `h(x, y) = h(y, x)`. Its mean `theta = E h(X, X')`, first
//! projection `h1(x) = E h(X, x) - theta` and degenerate part
//! `h2(x, y) = h(x, y) - h1(x) - h1(y) - theta` drive everything downstream.
//! Analytic metadata, when attached, makes those exact; otherwise they are
//! Monte Carlo estimates over a marginal sampler.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{mean_se, Estimate, Kahan};
use crate::processes::{InnovationSpec, InnovationStrip, ShiftProcess};
use crate::rng::{tag, RngStream};

/// Which built-in shape a kernel has; drives analytic shortcuts elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelForm {
    /// `(x - y)^2 / 2` — the variance-estimation kernel.
    Variance,
    /// `x + y`.
    Sum,
    /// `x * y`.
    Product,
    Custom,
}

/// Uniform-continuity modulus `omega(t) = c * t^alpha` attached to a kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderModulus {
    pub constant: f64,
    pub exponent: f64,
}

/// Optional exact mean and first projection for a specific marginal law.
#[derive(Clone)]
pub struct AnalyticMeta {
    pub mean: f64,
    pub h1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

#[derive(Clone)]
pub struct PairKernel {
    name: String,
    form: KernelForm,
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    holder: Option<HolderModulus>,
    meta: Option<AnalyticMeta>,
}

impl fmt::Debug for PairKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairKernel")
            .field("name", &self.name)
            .field("form", &self.form)
            .field("holder", &self.holder)
            .field("has_meta", &self.meta.is_some())
            .finish()
    }
}

impl PairKernel {
    pub fn variance() -> Self {
        PairKernel {
            name: "variance".into(),
            form: KernelForm::Variance,
            eval: Arc::new(|x, y| 0.5 * (x - y) * (x - y)),
            holder: None,
            meta: None,
        }
    }

    pub fn sum() -> Self {
        PairKernel {
            name: "sum".into(),
            form: KernelForm::Sum,
            eval: Arc::new(|x, y| x + y),
            holder: None,
            meta: None,
        }
    }

    pub fn product() -> Self {
        PairKernel {
            name: "product".into(),
            form: KernelForm::Product,
            eval: Arc::new(|x, y| x * y),
            holder: None,
            meta: None,
        }
    }

    /// A user-supplied symmetric kernel. Symmetry is the caller's contract;
    /// the property tests sample it.
    pub fn custom<F>(name: &str, eval: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        PairKernel {
            name: name.into(),
            form: KernelForm::Custom,
            eval: Arc::new(eval),
            holder: None,
            meta: None,
        }
    }

    /// Attach a Holder modulus `omega(t) = c t^alpha`, `alpha` in (0, 1].
    pub fn with_holder(mut self, constant: f64, exponent: f64) -> Result<Self> {
        if !(constant.is_finite() && constant >= 0.0) || !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::Config(format!(
                "holder modulus needs c >= 0 and alpha in (0,1], got c={constant}, alpha={exponent}"
            )));
        }
        self.holder = Some(HolderModulus { constant, exponent });
        Ok(self)
    }

    /// Attach the exact mean and first projection for the marginal the kernel
    /// will be used with. Trusted; `validate_meta` cross-checks it.
    pub fn with_meta<F>(mut self, mean: f64, h1: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.meta = Some(AnalyticMeta { mean, h1: Arc::new(h1) });
        self
    }

    /// Variance kernel with exact metadata for a marginal with the given
    /// mean and variance: `theta = Var X`, `h1(x) = ((x - mean)^2 - Var X) / 2`.
    pub fn variance_with_meta(marginal_mean: f64, marginal_var: f64) -> Self {
        PairKernel::variance().with_meta(marginal_var, move |x| {
            0.5 * ((x - marginal_mean) * (x - marginal_mean) - marginal_var)
        })
    }

    /// Sum kernel with exact metadata: `theta = 2 mean`, `h1(x) = x - mean`.
    pub fn sum_with_meta(marginal_mean: f64) -> Self {
        PairKernel::sum().with_meta(2.0 * marginal_mean, move |x| x - marginal_mean)
    }

    /// Product kernel with exact metadata: `theta = mean^2`,
    /// `h1(x) = mean * (x - mean)`.
    pub fn product_with_meta(marginal_mean: f64) -> Self {
        PairKernel::product().with_meta(marginal_mean * marginal_mean, move |x| {
            marginal_mean * (x - marginal_mean)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn holder(&self) -> Option<HolderModulus> {
        self.holder
    }

    pub fn meta(&self) -> Option<&AnalyticMeta> {
        self.meta.as_ref()
    }

    #[inline]
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Evaluate and surface non-finite results as numeric errors.
    pub fn evaluate_checked(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.evaluate(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!(
                "kernel `{}` returned {v} at ({x}, {y})",
                self.name
            )))
        }
    }
}

/// Marginal sampler for the kernel operations: either raw innovations or the
/// stationary marginal `X = f(V)` of a shift process.
#[derive(Clone, Debug)]
pub enum Marginal {
    Innovation(InnovationSpec),
    Process(ShiftProcess),
}

impl Marginal {
    pub fn sample_many(&self, count: usize, stream: RngStream) -> Result<Vec<f64>> {
        match self {
            Marginal::Innovation(spec) => crate::processes::sample_innovations(*spec, count, stream),
            Marginal::Process(p) => {
                let w = p.window_halfwidth() as i64;
                let strip = InnovationStrip::sample(p.innovations, 0, (count as i64) * (2 * w + 1) + 2 * w, stream)?;
                // windows spaced 2W+1 apart are disjoint, hence i.i.d. draws
                Ok((0..count as i64)
                    .map(|k| p.eval_window(strip.window(k * (2 * w + 1) + w, w as usize)))
                    .collect())
            }
        }
    }
}

/// `theta = E h(X, X')` over independent draws from the marginal.
pub fn kernel_mean(kernel: &PairKernel, marginal: &Marginal, samples: usize, stream: RngStream) -> Result<Estimate> {
    if let Some(meta) = kernel.meta() {
        return Ok(Estimate::exact(meta.mean));
    }
    if samples < 2 {
        return Err(Error::Argument("kernel_mean needs at least 2 samples".into()));
    }
    let xs = marginal.sample_many(samples, stream.child(tag::MOMENTS).child(1))?;
    let ys = marginal.sample_many(samples, stream.child(tag::MOMENTS).child(2))?;
    let mut vals = Vec::with_capacity(samples);
    for i in 0..samples {
        vals.push(kernel.evaluate_checked(xs[i], ys[i])?);
    }
    Ok(mean_se(&vals))
}

/// `h1(x) = E h(X, x) - theta`.
pub fn projection_h1(
    kernel: &PairKernel,
    marginal: &Marginal,
    x: f64,
    samples: usize,
    stream: RngStream,
) -> Result<Estimate> {
    if let Some(meta) = kernel.meta() {
        return Ok(Estimate::exact((meta.h1)(x)));
    }
    let theta = kernel_mean(kernel, marginal, samples, stream.child(tag::CENTERING))?;
    let xs = marginal.sample_many(samples, stream.child(tag::MOMENTS).child(3))?;
    let mut vals = Vec::with_capacity(samples);
    for &xi in &xs {
        vals.push(kernel.evaluate_checked(xi, x)?);
    }
    let e = mean_se(&vals);
    Ok(Estimate {
        value: e.value - theta.value,
        se: (e.se * e.se + theta.se * theta.se).sqrt(),
    })
}

/// `h2(x, y) = h(x, y) - h1(x) - h1(y) - theta`.
pub fn degenerate_part(
    kernel: &PairKernel,
    marginal: &Marginal,
    x: f64,
    y: f64,
    samples: usize,
    stream: RngStream,
) -> Result<Estimate> {
    let theta = kernel_mean(kernel, marginal, samples, stream.child(tag::CENTERING))?;
    let h1x = projection_h1(kernel, marginal, x, samples, stream.child(tag::PROBE).child(1))?;
    let h1y = projection_h1(kernel, marginal, y, samples, stream.child(tag::PROBE).child(2))?;
    let v = kernel.evaluate_checked(x, y)? - h1x.value - h1y.value - theta.value;
    let se = (theta.se * theta.se + h1x.se * h1x.se + h1y.se * h1y.se).sqrt();
    Ok(Estimate { value: v, se })
}

/// Materialize the degenerate part as a kernel of its own. With analytic
/// metadata the projection is exact; otherwise a shared Monte Carlo ensemble
/// backs `h1` and `theta` so the returned kernel is pure and deterministic.
pub fn degenerate_projection(
    kernel: &PairKernel,
    marginal: &Marginal,
    samples: usize,
    stream: RngStream,
) -> Result<PairKernel> {
    let base = kernel.clone();
    let name = format!("{}_degenerate", kernel.name());
    if let Some(meta) = kernel.meta() {
        let theta = meta.mean;
        let h1 = meta.h1.clone();
        return Ok(PairKernel::custom(&name, move |x, y| {
            base.evaluate(x, y) - h1(x) - h1(y) - theta
        })
        .with_meta(0.0, |_| 0.0));
    }
    if samples < 2 {
        return Err(Error::Argument("degenerate_projection needs at least 2 samples".into()));
    }
    let ensemble = marginal.sample_many(samples, stream.child(tag::ENSEMBLE))?;
    let mut acc = Kahan::new();
    for t in 0..samples / 2 {
        acc.add(base.evaluate(ensemble[2 * t], ensemble[2 * t + 1]));
    }
    let theta = acc.value() / (samples / 2) as f64;
    let h1_base = kernel.clone();
    let h1_ens = ensemble.clone();
    let h1 = move |x: f64| {
        let mut acc = Kahan::new();
        for &e in &h1_ens {
            acc.add(h1_base.evaluate(e, x));
        }
        acc.value() / h1_ens.len() as f64 - theta
    };
    let h1 = Arc::new(h1);
    let h1c = h1.clone();
    Ok(PairKernel::custom(&name, move |x, y| {
        base.evaluate(x, y) - h1c(x) - h1c(y) - theta
    }))
}

/// Per-probe mean of `k(x, X')`; a degenerate kernel keeps every probe within
/// its confidence band around zero.
#[derive(Clone, Debug)]
pub struct DegeneracyReport {
    pub probes: Vec<ProbeStat>,
    pub max_abs_mean: f64,
    /// true when some probe's `4 SE` interval excludes zero
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeStat {
    pub x: f64,
    pub mean: f64,
    pub se: f64,
}

/// Check `E k(x, X') = 0` at probe points drawn from the marginal.
pub fn check_degeneracy(
    kernel: &PairKernel,
    marginal: &Marginal,
    probe_count: usize,
    samples: usize,
    stream: RngStream,
) -> Result<DegeneracyReport> {
    if probe_count == 0 || samples < 2 {
        return Err(Error::Argument("check_degeneracy needs probes >= 1 and samples >= 2".into()));
    }
    let probes = marginal.sample_many(probe_count, stream.child(tag::PROBE))?;
    let mut stats = Vec::with_capacity(probe_count);
    let mut flagged = false;
    let mut max_abs = 0.0f64;
    for (i, &x) in probes.iter().enumerate() {
        let partners = marginal.sample_many(samples, stream.child(tag::ENSEMBLE).child(i as u64))?;
        let vals: Vec<f64> = partners.iter().map(|&p| kernel.evaluate(x, p)).collect();
        let e = mean_se(&vals);
        max_abs = max_abs.max(e.value.abs());
        if e.value.abs() > 4.0 * e.se {
            flagged = true;
        }
        stats.push(ProbeStat { x, mean: e.value, se: e.se });
    }
    Ok(DegeneracyReport {
        probes: stats,
        max_abs_mean: max_abs,
        flagged,
    })
}

/// Cross-check analytic metadata against Monte Carlo at build time.
pub fn validate_meta(kernel: &PairKernel, marginal: &Marginal, samples: usize, stream: RngStream) -> Result<()> {
    let Some(meta) = kernel.meta() else {
        return Ok(());
    };
    let stripped = PairKernel {
        name: kernel.name.clone(),
        form: kernel.form,
        eval: kernel.eval.clone(),
        holder: kernel.holder,
        meta: None,
    };
    let mc_mean = kernel_mean(&stripped, marginal, samples, stream.child(1))?;
    if (mc_mean.value - meta.mean).abs() > 4.0 * mc_mean.se {
        return Err(Error::Config(format!(
            "analytic mean {} is {} away from Monte Carlo {} (se {})",
            meta.mean,
            (mc_mean.value - meta.mean).abs(),
            mc_mean.value,
            mc_mean.se
        )));
    }
    let probes = marginal.sample_many(5, stream.child(2))?;
    for (i, &x) in probes.iter().enumerate() {
        let mc = projection_h1(&stripped, marginal, x, samples, stream.child(3).child(i as u64))?;
        let exact = (meta.h1)(x);
        if (mc.value - exact).abs() > 4.0 * mc.se {
            return Err(Error::Config(format!(
                "analytic h1({x}) = {exact} is outside 4 SE of Monte Carlo {} (se {})",
                mc.value, mc.se
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stream(seed: u64) -> RngStream {
        RngStream::root(seed)
    }

    fn rademacher() -> Marginal {
        Marginal::Innovation(InnovationSpec::Rademacher)
    }

    fn std_gaussian() -> Marginal {
        Marginal::Innovation(InnovationSpec::Gaussian { mean: 0.0, std: 1.0 })
    }

    #[test]
    fn variance_kernel_values() {
        let k = PairKernel::variance();
        assert_eq!(k.evaluate(1.0, -1.0), 2.0);
        assert_eq!(k.evaluate(3.0, 3.0), 0.0);
    }

    #[test]
    fn kernel_mean_variance_on_rademacher() {
        // enumerating the 4 sign patterns: E (eps - eps')^2 / 2 = 1
        let k = PairKernel::variance();
        let e = kernel_mean(&k, &rademacher(), 20_000, stream(1)).unwrap();
        assert!((e.value - 1.0).abs() < 3.0 * e.se, "mean {} se {}", e.value, e.se);
        // with analytic metadata the value is exact
        let km = PairKernel::variance_with_meta(0.0, 1.0);
        assert_eq!(kernel_mean(&km, &rademacher(), 2, stream(1)).unwrap().value, 1.0);
    }

    #[test]
    fn kernel_mean_sum_on_centered_marginal() {
        let k = PairKernel::sum_with_meta(0.0);
        assert_eq!(kernel_mean(&k, &rademacher(), 2, stream(1)).unwrap().value, 0.0);
    }

    #[test]
    fn kernel_mean_variance_on_gaussian() {
        let k = PairKernel::variance();
        let e = kernel_mean(&k, &std_gaussian(), 50_000, stream(2)).unwrap();
        assert!((e.value - 1.0).abs() < 3.0 * e.se);
    }

    #[test]
    fn kernel_mean_rejects_tiny_sample() {
        assert!(kernel_mean(&PairKernel::variance(), &rademacher(), 1, stream(0)).is_err());
    }

    #[test]
    fn h1_examples() {
        let kv = PairKernel::variance_with_meta(0.0, 1.0);
        assert_eq!(projection_h1(&kv, &rademacher(), 1.0, 2, stream(0)).unwrap().value, 0.0);
        assert_eq!(projection_h1(&kv, &std_gaussian(), 2.0, 2, stream(0)).unwrap().value, 1.5);
        let ks = PairKernel::sum_with_meta(0.0);
        assert_eq!(projection_h1(&ks, &std_gaussian(), 0.7, 2, stream(0)).unwrap().value, 0.7);
        // Monte Carlo route agrees with the analytic one
        let mc = projection_h1(&PairKernel::variance(), &std_gaussian(), 2.0, 50_000, stream(3)).unwrap();
        assert!((mc.value - 1.5).abs() < 4.0 * mc.se);
    }

    #[test]
    fn degenerate_part_examples() {
        let ks = PairKernel::sum_with_meta(0.0);
        let e = degenerate_part(&ks, &std_gaussian(), 0.3, -1.2, 2, stream(0)).unwrap();
        assert_eq!(e.value, 0.0);
        let kv = PairKernel::variance_with_meta(0.0, 1.0);
        let e = degenerate_part(&kv, &std_gaussian(), 0.8, -0.4, 2, stream(0)).unwrap();
        assert_relative_eq!(e.value, -(0.8 * -0.4), epsilon = 1e-12); // h2(x,y) = -x y
        // symmetry is inherited
        let a = degenerate_part(&kv, &std_gaussian(), 1.3, 0.2, 2, stream(0)).unwrap();
        let b = degenerate_part(&kv, &std_gaussian(), 0.2, 1.3, 2, stream(0)).unwrap();
        assert_relative_eq!(a.value, b.value, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_identity_with_meta() {
        let kv = PairKernel::variance_with_meta(0.0, 1.0);
        let meta = kv.meta().unwrap();
        for &(x, y) in &[(0.3, 1.7), (-2.0, 0.4), (1.0, 1.0)] {
            let h2 = degenerate_part(&kv, &std_gaussian(), x, y, 2, stream(0)).unwrap().value;
            let rebuilt = meta.mean + (meta.h1)(x) + (meta.h1)(y) + h2;
            assert_relative_eq!(rebuilt, kv.evaluate(x, y), epsilon = 1e-12);
        }
    }

    #[test]
    fn degeneracy_check_clean_for_projected_variance_kernel() {
        // h1 vanishes identically on {-1, 1}: h2 = h - theta is degenerate
        let kv = PairKernel::variance_with_meta(0.0, 1.0);
        let h2 = degenerate_projection(&kv, &rademacher(), 2, stream(4)).unwrap();
        let report = check_degeneracy(&h2, &rademacher(), 8, 4000, stream(5)).unwrap();
        assert!(!report.flagged, "max |mean| = {}", report.max_abs_mean);
    }

    #[test]
    fn degeneracy_check_flags_raw_sum_kernel() {
        // E h(x, X') = x != 0 for the unprojected sum kernel
        let report = check_degeneracy(&PairKernel::sum(), &rademacher(), 8, 4000, stream(6)).unwrap();
        assert!(report.flagged);
    }

    #[test]
    fn degenerate_projection_without_meta_is_nearly_degenerate() {
        // The Monte Carlo projection is degenerate only up to the ensemble
        // error, so assert the magnitude rather than the 4-SE flag (which is
        // exactly the sensitivity the flag is for).
        let h2 = degenerate_projection(&PairKernel::variance(), &std_gaussian(), 40_000, stream(7)).unwrap();
        let report = check_degeneracy(&h2, &std_gaussian(), 6, 4_000, stream(8)).unwrap();
        assert!(report.max_abs_mean < 0.05, "max |mean| = {}", report.max_abs_mean);
    }

    #[test]
    fn meta_validation_catches_wrong_mean() {
        let bad = PairKernel::variance().with_meta(5.0, |x| x);
        assert!(validate_meta(&bad, &rademacher(), 20_000, stream(9)).is_err());
        let good = PairKernel::variance_with_meta(0.0, 1.0);
        assert!(validate_meta(&good, &rademacher(), 20_000, stream(10)).is_ok());
    }

    #[test]
    fn holder_parameters_validated() {
        assert!(PairKernel::sum().with_holder(1.0, 0.0).is_err());
        assert!(PairKernel::sum().with_holder(-1.0, 1.0).is_err());
        assert!(PairKernel::sum().with_holder(2.0, 0.5).is_ok());
    }

    #[test]
    fn nan_is_surfaced() {
        let k = PairKernel::custom("bad", |x, y| (x - y).sqrt());
        assert!(k.evaluate_checked(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn builtin_kernels_are_symmetric(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            for k in [PairKernel::variance(), PairKernel::sum(), PairKernel::product()] {
                prop_assert_eq!(k.evaluate(x, y), k.evaluate(y, x));
            }
        }
    }
}
