//! Small numeric helpers: compensated summation, batch-mean standard errors,
//! quantiles.

/// Kahan–Neumaier compensated accumulator. Identity checks in the block
/// decomposition compare sums taken in different orders at 1e-9 relative
/// tolerance, which needs controlled rounding.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Point estimate with a standard error (zero when the value is analytic).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut acc = Kahan::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value() / xs.len() as f64
}

/// Sample mean and its standard error `sd / sqrt(n)`.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n < 2 {
        return Estimate::exact(if n == 1 { xs[0] } else { 0.0 });
    }
    let m = mean(xs);
    let mut acc = Kahan::new();
    for &x in xs {
        let d = x - m;
        acc.add(d * d);
    }
    let var = acc.value() / (n - 1) as f64;
    Estimate {
        value: m,
        se: (var / n as f64).sqrt(),
    }
}

/// Mean with a batch-means standard error: the sample is cut into `batches`
/// contiguous blocks and the spread of the block means sets the error bar.
pub fn batch_mean_se(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let b = batches.clamp(1, n.max(1));
    if n < 2 || b < 2 {
        return mean_se(xs);
    }
    let size = n / b;
    if size == 0 {
        return mean_se(xs);
    }
    let used = size * b;
    let means: Vec<f64> = (0..b).map(|k| mean(&xs[k * size..(k + 1) * size])).collect();
    let overall = mean(&xs[..used]);
    let mut acc = Kahan::new();
    for &bm in &means {
        let d = bm - overall;
        acc.add(d * d);
    }
    let var_between = acc.value() / (b - 1) as f64;
    Estimate {
        value: overall,
        se: (var_between / b as f64).sqrt(),
    }
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let mut acc = Kahan::new();
    for &x in xs {
        let d = x - m;
        acc.add(d * d);
    }
    acc.value() / (n - 1) as f64
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must be in [0,1]");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}
