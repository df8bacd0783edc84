//! The pair sum `U_n = sum_{1 <= i < j <= n} h(X_i, X_j)`, its prefix
//! trajectory, the independent-data variant on vector arguments, and the
//! stationarity-reduced centering constant `E U_n`.

use crate::error::{Error, Result};
use crate::kernels::{KernelForm, PairKernel};
use crate::numeric::{mean_se, Estimate, Kahan};
use crate::processes::{InnovationStrip, ShiftProcess};
use crate::rng::{tag, RngStream};

/// Exact pair sum. Summation order is fixed (`j` outer ascending, `i` inner
/// ascending) and compensated, so prefix and direct computations agree
/// bit-for-bit.
pub fn u_statistic(kernel: &PairKernel, values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Argument(format!("u_statistic needs n >= 2, got {n}")));
    }
    let mut acc = Kahan::new();
    for j in 1..n {
        for i in 0..j {
            acc.add(kernel.evaluate(values[i], values[j]));
        }
    }
    Ok(acc.value())
}

/// The trajectory `(U_2, ..., U_n)`, computed incrementally in O(n^2) total.
pub fn u_statistic_prefixes(kernel: &PairKernel, values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Argument(format!("u_statistic_prefixes needs n >= 2, got {n}")));
    }
    let mut acc = Kahan::new();
    let mut out = Vec::with_capacity(n - 1);
    for j in 1..n {
        for i in 0..j {
            acc.add(kernel.evaluate(values[i], values[j]));
        }
        out.push(acc.value());
    }
    Ok(out)
}

/// `U_n^ind`: pair sum of a symmetric kernel over vector-valued data.
pub fn u_statistic_ind<F>(kernel: F, data: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = data.len();
    if n < 2 {
        return Err(Error::Argument(format!("u_statistic_ind needs n >= 2, got {n}")));
    }
    let d = data[0].len();
    if data.iter().any(|v| v.len() != d) {
        return Err(Error::Argument("u_statistic_ind needs uniform vector length".into()));
    }
    let mut acc = Kahan::new();
    for j in 1..n {
        for i in 0..j {
            acc.add(kernel(&data[i], &data[j]));
        }
    }
    Ok(acc.value())
}

/// Lag-indexed means `nu(k) = E h(X_0, X_k)`; constant `nu_inf` once the
/// windows at distance `k > 2W` are disjoint.
#[derive(Clone, Debug)]
pub struct LagMeans {
    /// `nu(1) .. nu(2W)`
    pub close: Vec<f64>,
    pub inf: f64,
    pub se: f64,
}

impl LagMeans {
    pub fn nu(&self, lag: usize) -> f64 {
        assert!(lag >= 1, "lag must be >= 1");
        if lag <= self.close.len() {
            self.close[lag - 1]
        } else {
            self.inf
        }
    }

    /// `E U_n = sum_{k=1}^{n-1} (n - k) nu(k)` by stationarity.
    pub fn expected_u(&self, n: usize) -> f64 {
        let mut acc = Kahan::new();
        for k in 1..n {
            acc.add((n - k) as f64 * self.nu(k));
        }
        acc.value()
    }

    /// `(E U_2, ..., E U_n)` via `E U_m - E U_{m-1} = sum_{k<m} nu(k)`.
    pub fn expected_u_prefixes(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        let mut cum_nu = Kahan::new(); // sum_{k=1}^{m-1} nu(k)
        let mut total = Kahan::new(); // E U_m
        for m in 2..=n {
            cum_nu.add(self.nu(m - 1));
            total.add(cum_nu.value());
            out.push(total.value());
        }
        out
    }
}

/// Per-lag kernel means for a process, analytic for built-in kernels on
/// linear functionals and Monte Carlo otherwise.
pub fn lag_mean_table(
    kernel: &PairKernel,
    process: &ShiftProcess,
    reps: usize,
    stream: RngStream,
) -> Result<LagMeans> {
    let w = process.window_halfwidth();
    if let Some(table) = analytic_lag_means(kernel, process) {
        return Ok(table);
    }
    if reps < 2 {
        return Err(Error::Argument("lag_mean_table needs reps >= 2".into()));
    }
    // close lags share a strip per replication; the far constant uses
    // windows 2W+1 apart, which are independent
    let max_lag = 2 * w;
    let mut close = vec![0.0; max_lag];
    let far_lag = (2 * w + 1) as i64;
    let mut far_vals = Vec::with_capacity(reps);
    let mut close_vals = vec![Vec::with_capacity(reps); max_lag];
    for r in 0..reps {
        let sub = stream.child(tag::CENTERING).child(r as u64);
        let strip = InnovationStrip::sample(
            process.innovations,
            -(w as i64),
            far_lag + w as i64,
            sub,
        )?;
        let x0 = process.eval_window(strip.window(0, w));
        for (k, vals) in close_vals.iter_mut().enumerate() {
            let xk = process.eval_window(strip.window((k + 1) as i64, w));
            vals.push(kernel.evaluate(x0, xk));
        }
        let xfar = process.eval_window(strip.window(far_lag, w));
        far_vals.push(kernel.evaluate(x0, xfar));
    }
    let mut se2 = 0.0;
    for (k, vals) in close_vals.iter().enumerate() {
        let e = mean_se(vals);
        close[k] = e.value;
        se2 = f64::max(se2, e.se * e.se);
    }
    let far = mean_se(&far_vals);
    Ok(LagMeans {
        close,
        inf: far.value,
        se: (se2.max(far.se * far.se)).sqrt(),
    })
}

/// Exact lag means for {variance, sum, product} kernels on linear processes.
pub fn analytic_lag_means(kernel: &PairKernel, process: &ShiftProcess) -> Option<LagMeans> {
    let w = process.window_halfwidth();
    let mean = process.level_mean(w)?;
    let var = process.level_cov(w, 0)?;
    let nu_at = |cov: f64| -> Option<f64> {
        match kernel.form() {
            KernelForm::Variance => Some(var - cov),
            KernelForm::Sum => Some(2.0 * mean),
            KernelForm::Product => Some(cov + mean * mean),
            KernelForm::Custom => None,
        }
    };
    let mut close = Vec::with_capacity(2 * w);
    for lag in 1..=2 * w {
        close.push(nu_at(process.level_cov(w, lag)?)?);
    }
    Some(LagMeans {
        close,
        inf: nu_at(0.0)?,
        se: 0.0,
    })
}

/// `E U_n` with a standard error; exact (se = 0) on the analytic path.
pub fn expected_u(
    kernel: &PairKernel,
    process: &ShiftProcess,
    n: usize,
    reps: usize,
    stream: RngStream,
) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::Argument(format!("expected_u needs n >= 2, got {n}")));
    }
    let table = lag_mean_table(kernel, process, reps, stream)?;
    let value = table.expected_u(n);
    // worst case: the per-lag errors are fully correlated and the weights sum
    // to n(n-1)/2
    let weight = 0.5 * (n as f64) * (n as f64 - 1.0);
    Ok(Estimate {
        value,
        se: table.se * weight,
    })
}
