//! The per-level decomposition engine and the level assembly.
//!
//! For one level the centered pair sum `sum_{i<j} H(i,j)` regroups exactly as
//!
//! ```text
//! direct = linear_part + linear_adjust
//!        + sum_{(a,b)} degenerate[(a,b)]
//!        + R_{1,1} + R_{1,2} + R_2 + R_3 + R_4 + R_5 + R_6
//! ```
//!
//! `linear_part` is the plain scaled sum `n * sum_{k<=n} psi(k)` (the form the
//! central limit theorem runs on); `linear_adjust` carries the exact
//! difference between the block-scaled linear term produced by projecting the
//! class U-statistics and that plain form. Both sides of every cancellation
//! reuse the same cached `f_l` values and the same estimated constants, so
//! `residual` is floating-point noise whenever the index algebra is right.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::PairKernel;
use crate::numeric::Kahan;
use crate::processes::{InnovationStrip, ShiftProcess};
use crate::rng::{tag, RngStream};

use super::blocks::{
    block_partition, classes, class_slice_positions, for_each_block_zero_term,
    for_each_class_ustat_term, for_each_r11_term, for_each_r12_term, for_each_r2_term,
    for_each_r5_term, for_each_r6_term, BlockIndex,
};
use super::level::{build_level_context, LevelContext, LevelKernel, ProjectionConfig};

/// Estimation budgets for the decomposition's Monte Carlo fallbacks.
#[derive(Clone, Copy, Debug)]
pub struct DecomposeConfig {
    /// tail resampling budget per conditional truncation of a custom functional
    pub tail_samples: usize,
    /// replications for estimated centering constants and moments
    pub moment_reps: usize,
    /// ensemble size backing the projection of a custom kernel
    pub ensemble_size: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            tail_samples: 4096,
            moment_reps: 100_000,
            ensemble_size: 4096,
        }
    }
}

impl DecomposeConfig {
    fn projection(&self, tail_samples: usize) -> ProjectionConfig {
        ProjectionConfig {
            tail_samples,
            moment_reps: self.moment_reps,
            ensemble_size: self.ensemble_size,
        }
    }
}

/// The explicit remainder terms of one level.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Remainders {
    pub r11: f64,
    pub r12: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
}

impl Remainders {
    pub fn total(&self) -> f64 {
        self.r11 + self.r12 + self.r2 + self.r3 + self.r4 + self.r5 + self.r6
    }

    pub fn abs_total(&self) -> f64 {
        self.r11.abs()
            + self.r12.abs()
            + self.r2.abs()
            + self.r3.abs()
            + self.r4.abs()
            + self.r5.abs()
            + self.r6.abs()
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.r11, self.r12, self.r2, self.r3, self.r4, self.r5, self.r6]
    }
}

/// Exact split of one level's centered pair sum.
#[derive(Clone, Debug)]
pub struct LevelDecomposition {
    pub ell: usize,
    /// `None` when the level was too short for a block split (or `ell = 0`,
    /// which uses the classical split over all of `1..=n`).
    pub block: Option<BlockIndex>,
    /// plain scaled linear term `n * sum_{k=1}^{n} psi(k)`
    pub linear_part: f64,
    /// exact block-scaled linear term minus `linear_part`
    pub linear_adjust: f64,
    /// per-class degenerate block U-statistics
    pub degenerate: BTreeMap<(usize, usize), f64>,
    pub remainders: Remainders,
    /// directly computed centered level pair sum (the oracle side)
    pub direct: f64,
    /// `direct - (linear_part + linear_adjust + degenerate + remainders)`
    pub residual: f64,
}

impl LevelDecomposition {
    pub fn degenerate_total(&self) -> f64 {
        let mut acc = Kahan::new();
        for v in self.degenerate.values() {
            acc.add(*v);
        }
        acc.value()
    }

    pub fn parts_sum(&self) -> f64 {
        self.linear_part + self.linear_adjust + self.degenerate_total() + self.remainders.total()
    }

    pub fn parts_abs_sum(&self) -> f64 {
        self.linear_part.abs()
            + self.linear_adjust.abs()
            + self.degenerate.values().map(|v| v.abs()).sum::<f64>()
            + self.remainders.abs_total()
    }

    /// `|residual|` relative to the total mass moved around by the split.
    pub fn relative_residual(&self) -> f64 {
        let denom = self.parts_abs_sum() + self.direct.abs();
        if denom == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / denom
        }
    }
}

/// Innovation coverage needed to decompose level `ell` over `1..=n`:
/// the far-class telescoping reaches positions slightly past `n`.
pub fn required_span(ell: usize, n: usize) -> (i64, i64) {
    let pos = level_pos_max(n, ell);
    (1 - ell as i64, pos + ell as i64)
}

fn level_pos_max(n: usize, ell: usize) -> i64 {
    if ell == 0 {
        return n as i64;
    }
    let bs = 4 * ell + 2;
    let m = n / bs;
    if m >= 1 {
        (n as i64).max((m * bs + 2 * ell + 1) as i64)
    } else {
        n as i64
    }
}

/// Cached per-position values of one level: `f_l(V_j)`, `f_{l-1}(V_j)` and the
/// centered projection `psi(j)`. Custom functionals are Monte Carlo, so the
/// cache is also what keeps every part of the identity looking at the same
/// realization.
struct LevelData<'a> {
    ell: usize,
    n: usize,
    kernel: &'a PairKernel,
    ctx: &'a LevelContext,
    ctx_prev: Option<&'a LevelContext>,
    xs: Vec<f64>,
    xs_prev: Vec<f64>,
    psi: Vec<f64>,
}

impl LevelData<'_> {
    #[inline]
    fn x(&self, pos: i64) -> f64 {
        self.xs[(pos - 1) as usize]
    }

    #[inline]
    fn x_prev(&self, pos: i64) -> f64 {
        self.xs_prev[(pos - 1) as usize]
    }

    #[inline]
    fn psi(&self, pos: i64) -> f64 {
        self.psi[(pos - 1) as usize]
    }

    /// Centered level increment `H(i, j)`; the centering constant depends on
    /// the lag while the windows overlap and is constant past `2l`.
    #[inline]
    fn h_centered(&self, i: i64, j: i64) -> f64 {
        debug_assert!(i < j);
        let lag = (j - i) as usize;
        let top = self.kernel.evaluate(self.x(i), self.x(j)) - self.ctx.moments.nu(lag);
        match self.ctx_prev {
            None => top,
            Some(prev) => {
                top - (self.kernel.evaluate(self.x_prev(i), self.x_prev(j)) - prev.moments.nu(lag))
            }
        }
    }
}

fn build_level_data<'a>(
    kernel: &'a PairKernel,
    process: &ShiftProcess,
    ell: usize,
    n: usize,
    strip: &InnovationStrip,
    ctx: &'a LevelContext,
    ctx_prev: Option<&'a LevelContext>,
    tail_samples: usize,
    stream: RngStream,
) -> Result<LevelData<'a>> {
    let (lo, hi) = required_span(ell, n);
    if !strip.covers(lo, hi) {
        return Err(Error::Argument(format!(
            "insufficient innovations: level {ell} over n = {n} needs [{lo}, {hi}], strip covers [{}, {}]",
            strip.first_index(),
            strip.last_index()
        )));
    }
    let pos_max = level_pos_max(n, ell);
    let mut xs = Vec::with_capacity(pos_max as usize);
    let mut xs_prev = Vec::with_capacity(if ell == 0 { 0 } else { pos_max as usize });
    for j in 1..=pos_max {
        let sub = stream.child(tag::POSITION).child(ell as u64).child(j as u64);
        xs.push(process.truncated(ell, strip.window(j, ell), tail_samples, sub)?);
        if ell > 0 {
            let sub_prev = stream.child(tag::POSITION).child(ell as u64 - 1).child(j as u64);
            xs_prev.push(process.truncated(ell - 1, strip.window(j, ell - 1), tail_samples, sub_prev)?);
        }
    }
    let psi = (0..pos_max as usize)
        .map(|idx| match ctx_prev {
            None => ctx.proj.g(xs[idx]) - ctx.moments.nu_inf,
            Some(prev) => {
                (ctx.proj.g(xs[idx]) - prev.proj.g(xs_prev[idx]))
                    - (ctx.moments.nu_inf - prev.moments.nu_inf)
            }
        })
        .collect();
    Ok(LevelData {
        ell,
        n,
        kernel,
        ctx,
        ctx_prev,
        xs,
        xs_prev,
        psi,
    })
}

fn decompose_from_data(data: &LevelData<'_>) -> LevelDecomposition {
    let n = data.n;
    let ell = data.ell;

    let mut direct = Kahan::new();
    for j in 2..=n as i64 {
        for i in 1..j {
            direct.add(data.h_centered(i, j));
        }
    }
    let direct = direct.value();

    let mut sum_psi = Kahan::new();
    for k in 1..=n as i64 {
        sum_psi.add(data.psi(k));
    }
    let sum_psi = sum_psi.value();

    if ell == 0 {
        // classical Hoeffding split over i.i.d. level-0 data: the exact linear
        // coefficient is n-1; the reported linear part is the plain n-scaled
        // sum with the difference carried by linear_adjust
        let linear_part = n as f64 * sum_psi;
        let true_linear = (n as f64 - 1.0) * sum_psi;
        let linear_adjust = true_linear - linear_part;
        let mut deg = Kahan::new();
        for j in 2..=n as i64 {
            for i in 1..j {
                let q2 = data.kernel.evaluate(data.x(i), data.x(j))
                    - data.ctx.moments.nu_inf
                    - data.psi(i)
                    - data.psi(j);
                deg.add(q2);
            }
        }
        let mut degenerate = BTreeMap::new();
        degenerate.insert((1, 1), deg.value());
        let remainders = Remainders::default();
        let residual = direct - (linear_part + linear_adjust + deg.value());
        return LevelDecomposition {
            ell,
            block: None,
            linear_part,
            linear_adjust,
            degenerate,
            remainders,
            direct,
            residual,
        };
    }

    let block = block_partition(n, ell).ok();
    let m = block.map_or(0, |b| b.m);

    let mut rem = Remainders::default();
    {
        let mut acc = Kahan::new();
        for_each_r11_term(n, ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
        rem.r11 = acc.value();
    }
    {
        let mut acc = Kahan::new();
        for_each_r12_term(n, ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
        rem.r12 = acc.value();
    }
    {
        let mut acc = Kahan::new();
        for_each_r2_term(ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
        rem.r2 = acc.value();
    }

    let mut degenerate = BTreeMap::new();
    let mut r3 = Kahan::new();
    let mut r4 = Kahan::new();
    let mut r5 = Kahan::new();
    let mut r6 = Kahan::new();
    let mut true_linear = Kahan::new();
    let linear_weight = m as f64 - 2.0; // blocks 1..=m-1 give a Hoeffding prefactor of m-2

    for class in classes(ell) {
        let mut pairsum = Kahan::new();
        for_each_class_ustat_term(ell, class, m, &mut |i, j, w| {
            pairsum.add(w * data.h_centered(i, j))
        });
        let mut q1_sum = Kahan::new();
        for u in 1..m as i64 {
            for pos in class_slice_positions(ell, class, u) {
                q1_sum.add(data.psi(pos));
            }
        }
        // the scaled projection is computed once and reused on both sides of
        // the cancellation, so it drops out of the identity exactly
        let scaled_q1 = linear_weight * q1_sum.value();
        degenerate.insert((class.a, class.b), pairsum.value() - scaled_q1);
        true_linear.add(scaled_q1);

        if class.is_near(ell) {
            for_each_block_zero_term(ell, class, m, &mut |i, j, w| {
                r3.add(w * data.h_centered(i, j))
            });
        } else {
            for_each_block_zero_term(ell, class, m, &mut |i, j, w| {
                r4.add(w * data.h_centered(i, j))
            });
            for_each_r5_term(ell, class, m, &mut |i, j, w| r5.add(w * data.h_centered(i, j)));
            for_each_r6_term(ell, class, m, &mut |i, j, w| r6.add(w * data.h_centered(i, j)));
        }
    }
    rem.r3 = r3.value();
    rem.r4 = r4.value();
    rem.r5 = r5.value();
    rem.r6 = r6.value();

    let linear_part = n as f64 * sum_psi;
    let linear_adjust = true_linear.value() - linear_part;

    let mut parts = Kahan::new();
    parts.add(linear_part);
    parts.add(linear_adjust);
    for v in degenerate.values() {
        parts.add(*v);
    }
    for r in rem.as_array() {
        parts.add(r);
    }
    let residual = direct - parts.value();

    LevelDecomposition {
        ell,
        block,
        linear_part,
        linear_adjust,
        degenerate,
        remainders: rem,
        direct,
        residual,
    }
}

/// Remainder terms of one level plus the linear-sum mismatch
/// `R_7 = (4l+2)m * sum_{k<=B m+1} psi(k) - n * sum_{k<=n} psi(k)`
/// (the difference between the block-scaled and plain linear sums), without
/// paying for the O(n^2) direct and degenerate parts.
#[allow(clippy::too_many_arguments)]
pub(crate) fn level_remainders_and_r7(
    kernel: &PairKernel,
    process: &ShiftProcess,
    ell: usize,
    n: usize,
    strip: &InnovationStrip,
    ctx: &LevelContext,
    ctx_prev: &LevelContext,
    tail_samples: usize,
    stream: RngStream,
) -> Result<(Remainders, f64)> {
    debug_assert!(ell >= 1);
    let data = build_level_data(kernel, process, ell, n, strip, ctx, Some(ctx_prev), tail_samples, stream)?;
    let bs = 4 * ell + 2;
    let m = n / bs;

    let mut rem = Remainders::default();
    let mut acc = Kahan::new();
    for_each_r11_term(n, ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
    rem.r11 = acc.value();
    let mut acc = Kahan::new();
    for_each_r12_term(n, ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
    rem.r12 = acc.value();
    let mut acc = Kahan::new();
    for_each_r2_term(ell, m, &mut |i, j, w| acc.add(w * data.h_centered(i, j)));
    rem.r2 = acc.value();
    let mut r3 = Kahan::new();
    let mut r4 = Kahan::new();
    let mut r5 = Kahan::new();
    let mut r6 = Kahan::new();
    for class in classes(ell) {
        if class.is_near(ell) {
            for_each_block_zero_term(ell, class, m, &mut |i, j, w| r3.add(w * data.h_centered(i, j)));
        } else {
            for_each_block_zero_term(ell, class, m, &mut |i, j, w| r4.add(w * data.h_centered(i, j)));
            for_each_r5_term(ell, class, m, &mut |i, j, w| r5.add(w * data.h_centered(i, j)));
            for_each_r6_term(ell, class, m, &mut |i, j, w| r6.add(w * data.h_centered(i, j)));
        }
    }
    rem.r3 = r3.value();
    rem.r4 = r4.value();
    rem.r5 = r5.value();
    rem.r6 = r6.value();

    // the psi cache reaches pos_max >= B m + 1, so the sum range is covered
    let block_len = bs * m + 1;
    let mut block_sum = Kahan::new();
    for k in 1..=block_len as i64 {
        block_sum.add(data.psi(k));
    }
    let mut plain_sum = Kahan::new();
    for k in 1..=n as i64 {
        plain_sum.add(data.psi(k));
    }
    let r7 = (bs * m) as f64 * block_sum.value() - n as f64 * plain_sum.value();
    Ok((rem, r7))
}

/// Decompose one level of the centered U-statistic over `values 1..=n` drawn
/// from `innovations`. The strip must cover [`required_span`]`(ell, n)`.
pub fn decompose_level(
    level: &LevelKernel,
    innovations: &InnovationStrip,
    n: usize,
    cfg: &DecomposeConfig,
    stream: RngStream,
) -> Result<LevelDecomposition> {
    if n < 2 {
        return Err(Error::Argument(format!("decompose_level needs n >= 2, got {n}")));
    }
    let proj_cfg = cfg.projection(level.tail_samples);
    let ctx = build_level_context(&level.kernel, &level.process, level.ell, &proj_cfg, stream)?;
    let ctx_prev = if level.ell > 0 {
        Some(build_level_context(
            &level.kernel,
            &level.process,
            level.ell - 1,
            &proj_cfg,
            stream,
        )?)
    } else {
        None
    };
    let data = build_level_data(
        &level.kernel,
        &level.process,
        level.ell,
        n,
        innovations,
        &ctx,
        ctx_prev.as_ref(),
        level.tail_samples,
        stream,
    )?;
    Ok(decompose_from_data(&data))
}

/// The full multi-level decomposition and its reconstruction check.
#[derive(Clone, Debug)]
pub struct GeneralizedDecomposition {
    pub levels: Vec<LevelDecomposition>,
    /// direct `U_n` evaluated on the true path values
    pub u_n: f64,
    /// centering constant assembled from the level-`l_max` lag means
    pub expected_u: f64,
    /// `u_n - expected_u`
    pub centered: f64,
    /// sum of every part over every level
    pub parts_total: f64,
    /// `centered - parts_total`; for `l_max >= W` this is floating-point
    /// noise, below that it measures the discarded tail levels
    pub total_residual: f64,
    pub relative_residual: f64,
}

/// Decompose levels `0..=l_max` of `U_n - E U_n` for a freshly simulated path.
pub fn generalized_decomposition(
    kernel: &PairKernel,
    process: &ShiftProcess,
    n: usize,
    l_max: usize,
    cfg: &DecomposeConfig,
    stream: RngStream,
) -> Result<GeneralizedDecomposition> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "generalized_decomposition needs n >= 2, got {n}"
        )));
    }
    let w = process.window_halfwidth();
    let mut lo = 1 - w as i64;
    let mut hi = n as i64 + w as i64;
    for ell in 0..=l_max {
        let (a, b) = required_span(ell, n);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let strip = InnovationStrip::sample(process.innovations, lo, hi, stream.child(tag::PATH))?;

    let proj_cfg = cfg.projection(cfg.tail_samples);
    let mut contexts = Vec::with_capacity(l_max + 1);
    for ell in 0..=l_max {
        contexts.push(build_level_context(kernel, process, ell, &proj_cfg, stream)?);
    }

    let mut levels = Vec::with_capacity(l_max + 1);
    for ell in 0..=l_max {
        let ctx_prev = if ell > 0 { Some(&contexts[ell - 1]) } else { None };
        let data = build_level_data(
            kernel,
            process,
            ell,
            n,
            &strip,
            &contexts[ell],
            ctx_prev,
            cfg.tail_samples,
            stream,
        )?;
        levels.push(decompose_from_data(&data));
    }

    let path: Vec<f64> = (1..=n as i64)
        .map(|j| process.eval_window(strip.window(j, w)))
        .collect();
    let u_n = crate::ustat::u_statistic(kernel, &path)?;

    let top = &contexts[l_max].moments;
    let mut eu = Kahan::new();
    for k in 1..n {
        eu.add((n - k) as f64 * top.nu(k));
    }
    let expected_u = eu.value();
    let centered = u_n - expected_u;

    let mut parts = Kahan::new();
    let mut parts_abs = 0.0;
    for lvl in &levels {
        parts.add(lvl.parts_sum());
        parts_abs += lvl.parts_abs_sum();
    }
    let parts_total = parts.value();
    let total_residual = centered - parts_total;
    let denom = parts_abs + centered.abs();
    let relative_residual = if denom == 0.0 {
        total_residual.abs()
    } else {
        total_residual.abs() / denom
    };

    Ok(GeneralizedDecomposition {
        levels,
        u_n,
        expected_u,
        centered,
        parts_total,
        total_residual,
        relative_residual,
    })
}
