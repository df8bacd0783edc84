//! Block geometry for one level: residue classes of the Euclidean division by
//! `4l+2`, the block data vectors `eps^{a,b}_u`, the class kernels `h_{a,b}`,
//! and the index enumeration shared by the value computation and the
//! pair-coverage audit.
//!
//! Positions are 1-based; block `u` holds positions `u(4l+2)+1 ..= (u+1)(4l+2)`.
//! For a class `(a, b)` with `a >= b` and `d = a - b`:
//!
//! * **near** (`d <= 2l`): block `u` of the class data starts at innovation
//!   `u(4l+2) + b - l`; the kernel slices produce the windows centered at
//!   `u(4l+2)+a` and `u(4l+2)+b`.
//! * **far** (`d >= 2l+1`): block `u` starts at `u(4l+2) + b + l + 1`; the
//!   slices produce the windows centered at `u(4l+2)+a` and `(u+1)(4l+2)+b`.
//!   Re-expressing the wanted class pairs through these shifted slices is an
//!   add-and-subtract telescoping whose boundary rows are exactly `R_4..R_6`.
//!
//! The class U-statistics run over blocks `u = 1 ..= m-1`; the `u = 0` rows
//! are `R_3` (near) and `R_4` (far).

use crate::error::{Error, Result};
use crate::processes::InnovationStrip;
use crate::rng::RngStream;

use super::level::LevelKernel;

/// How `1..=n` splits into `4l+2`-blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockIndex {
    pub ell: usize,
    /// `4l + 2`
    pub block_size: usize,
    /// number of complete blocks `floor(n / (4l+2))`
    pub m: usize,
    /// `(4l+2) * m`
    pub covered_end: usize,
    pub n: usize,
}

impl BlockIndex {
    /// Residual indices `covered_end+1 ..= n` (empty when `n` is a multiple).
    pub fn residual(&self) -> std::ops::RangeInclusive<usize> {
        self.covered_end + 1..=self.n
    }

    /// The unique `(u, a)` with `j = u(4l+2) + a`, `a` in `1..=4l+2`.
    pub fn coordinates(&self, j: usize) -> (usize, usize) {
        debug_assert!(j >= 1 && j <= self.covered_end);
        ((j - 1) / self.block_size, (j - 1) % self.block_size + 1)
    }
}

/// Partition `1..=n` for level `ell >= 1`; fails when no complete block fits
/// (the caller then keeps the whole level in the direct remainder).
pub fn block_partition(n: usize, ell: usize) -> Result<BlockIndex> {
    if ell == 0 {
        return Err(Error::Argument("block partition is defined for levels >= 1".into()));
    }
    let block_size = 4 * ell + 2;
    if n < block_size {
        return Err(Error::Argument(format!(
            "n = {n} is below one block of size {block_size}; level {ell} degenerates to the direct sum"
        )));
    }
    let m = n / block_size;
    Ok(BlockIndex {
        ell,
        block_size,
        m,
        covered_end: block_size * m,
        n,
    })
}

/// Residue class `(a, b)`, `1 <= b <= a <= 4l+2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId {
    pub a: usize,
    pub b: usize,
}

impl ClassId {
    pub fn offset(&self) -> usize {
        self.a - self.b
    }

    pub fn is_near(&self, ell: usize) -> bool {
        self.offset() <= 2 * ell
    }
}

/// All classes of a level, in deterministic `(a, b)` order.
pub fn classes(ell: usize) -> Vec<ClassId> {
    let bs = 4 * ell + 2;
    let mut out = Vec::with_capacity(bs * (bs + 1) / 2);
    for a in 1..=bs {
        for b in 1..=a {
            out.push(ClassId { a, b });
        }
    }
    out
}

/// First innovation index of the class-`(a,b)` block `u`.
pub(crate) fn block_start(ell: usize, class: ClassId, u: i64) -> i64 {
    let bs = (4 * ell + 2) as i64;
    let b = class.b as i64;
    let l = ell as i64;
    if class.is_near(ell) {
        u * bs + b - l
    } else {
        u * bs + b + l + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Arg {
    X,
    Y,
}

/// The `htilde` slice terms of `h_{a,b}`: each term is
/// `(first argument, its 0-based offset, second argument, its offset)`.
pub(crate) fn class_term_offsets(ell: usize, class: ClassId) -> Vec<(Arg, usize, Arg, usize)> {
    let d = class.offset();
    if class.is_near(ell) {
        if d == 0 {
            // one copy only: the mirrored term would double-count the pair
            vec![(Arg::X, 0, Arg::Y, 0)]
        } else {
            vec![(Arg::X, d, Arg::Y, 0), (Arg::Y, d, Arg::X, 0)]
        }
    } else {
        let o = d - (2 * ell + 1);
        vec![
            (Arg::X, o, Arg::Y, 2 * ell + 1),
            (Arg::Y, o, Arg::X, 2 * ell + 1),
        ]
    }
}

/// Window center produced by slicing block `u` (x-side) / `v` (y-side) at the
/// given offset.
fn slice_center(ell: usize, class: ClassId, arg: Arg, offset: usize, u: i64, v: i64) -> i64 {
    let block = match arg {
        Arg::X => u,
        Arg::Y => v,
    };
    block_start(ell, class, block) + offset as i64 + ell as i64
}

/// The ordered index pairs `(i, j)`, `i < j`, consumed by
/// `h_{a,b}(eps_u, eps_v)` for `u < v`.
pub(crate) fn class_pair_positions(ell: usize, class: ClassId, u: i64, v: i64) -> Vec<(i64, i64)> {
    debug_assert!(u < v);
    class_term_offsets(ell, class)
        .into_iter()
        .map(|(a1, o1, a2, o2)| {
            let p = slice_center(ell, class, a1, o1, u, v);
            let q = slice_center(ell, class, a2, o2, u, v);
            (p.min(q), p.max(q))
        })
        .collect()
}

/// Window centers whose projections make up `q_1(eps_u)` for the class.
pub(crate) fn class_slice_positions(ell: usize, class: ClassId, u: i64) -> Vec<i64> {
    class_term_offsets(ell, class)
        .into_iter()
        .map(|(a1, o1, a2, o2)| {
            // the x-side slice of each term
            if a1 == Arg::X {
                slice_center(ell, class, a1, o1, u, u)
            } else {
                slice_center(ell, class, a2, o2, u, u)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// index-pair enumeration shared by the decomposition values and the audit
// ---------------------------------------------------------------------------

/// Class U-statistic terms: blocks `1 <= u < v <= m-1`.
pub(crate) fn for_each_class_ustat_term(
    ell: usize,
    class: ClassId,
    m: usize,
    f: &mut impl FnMut(i64, i64, f64),
) {
    if m < 3 {
        return;
    }
    for u in 1..(m as i64 - 1) {
        for v in (u + 1)..m as i64 {
            for (i, j) in class_pair_positions(ell, class, u, v) {
                f(i, j, 1.0);
            }
        }
    }
}

/// `R_3` (near classes) and `R_4` (far classes): the `u = 0` row.
pub(crate) fn for_each_block_zero_term(
    ell: usize,
    class: ClassId,
    m: usize,
    f: &mut impl FnMut(i64, i64, f64),
) {
    for v in 1..m as i64 {
        for (i, j) in class_pair_positions(ell, class, 0, v) {
            f(i, j, 1.0);
        }
    }
}

/// `R_5`: first telescoping boundary of a far class,
/// `sum_u H(uB+a, (u+1)B+b) - H(uB+a, mB+b)`.
pub(crate) fn for_each_r5_term(ell: usize, class: ClassId, m: usize, f: &mut impl FnMut(i64, i64, f64)) {
    debug_assert!(!class.is_near(ell));
    let bs = (4 * ell + 2) as i64;
    let (a, b) = (class.a as i64, class.b as i64);
    if m < 2 {
        return;
    }
    for u in 0..=(m as i64 - 2) {
        f(u * bs + a, (u + 1) * bs + b, 1.0);
        f(u * bs + a, m as i64 * bs + b, -1.0);
    }
}

/// `R_6`: second telescoping boundary of a far class,
/// `sum_v H(b, vB+a) - H(vB+b, vB+a)`.
pub(crate) fn for_each_r6_term(ell: usize, class: ClassId, m: usize, f: &mut impl FnMut(i64, i64, f64)) {
    debug_assert!(!class.is_near(ell));
    let bs = (4 * ell + 2) as i64;
    let (a, b) = (class.a as i64, class.b as i64);
    for v in 1..m as i64 {
        f(b, v * bs + a, 1.0);
        f(v * bs + b, v * bs + a, -1.0);
    }
}

/// `R_2`: within-block pairs of the covered region.
pub(crate) fn for_each_r2_term(ell: usize, m: usize, f: &mut impl FnMut(i64, i64, f64)) {
    let bs = (4 * ell + 2) as i64;
    for u in 0..m as i64 {
        for a in 1..=bs {
            for b in (a + 1)..=bs {
                f(u * bs + a, u * bs + b, 1.0);
            }
        }
    }
}

/// `R_{n,1,1}`: pairs with both indices in the residual tail of `j`'s block.
pub(crate) fn for_each_r11_term(n: usize, ell: usize, m: usize, f: &mut impl FnMut(i64, i64, f64)) {
    let bs = (4 * ell + 2) as i64;
    let covered_end = bs * m as i64;
    for j in (covered_end + 1)..=(n as i64) {
        let base = bs * ((j - 1) / bs);
        for i in (base + 1)..j {
            f(i, j, 1.0);
        }
    }
}

/// `R_{n,1,2}`: pairs pairing a covered index with a tail index.
pub(crate) fn for_each_r12_term(n: usize, ell: usize, m: usize, f: &mut impl FnMut(i64, i64, f64)) {
    let bs = (4 * ell + 2) as i64;
    let covered_end = bs * m as i64;
    for a in 1..=bs {
        for j in (covered_end + 1)..=(n as i64) {
            let blocks_below = (j - 1) / bs;
            for k in 0..blocks_below {
                f(bs * k + a, j, 1.0);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// public block objects
// ---------------------------------------------------------------------------

/// The class kernel `h_{a,b}` on pairs of `(4l+2)`-vectors.
#[derive(Clone, Debug)]
pub struct BlockKernel {
    level: LevelKernel,
    class: ClassId,
}

impl BlockKernel {
    pub fn class(&self) -> ClassId {
        self.class
    }

    /// Evaluate `h_{a,b}(x, y)`; both arguments must have length `4l+2`.
    pub fn evaluate(&self, x: &[f64], y: &[f64], stream: RngStream) -> Result<f64> {
        let bs = 4 * self.level.ell + 2;
        if x.len() != bs || y.len() != bs {
            return Err(Error::Argument(format!(
                "block kernel expects vectors of length {bs}, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        let w = 2 * self.level.ell + 1;
        let mut total = 0.0;
        for (t, (a1, o1, a2, o2)) in class_term_offsets(self.level.ell, self.class).into_iter().enumerate() {
            let first = match a1 {
                Arg::X => &x[o1..o1 + w],
                Arg::Y => &y[o1..o1 + w],
            };
            let second = match a2 {
                Arg::X => &x[o2..o2 + w],
                Arg::Y => &y[o2..o2 + w],
            };
            total += self.level.evaluate(first, second, stream.child(t as u64))?;
        }
        Ok(total)
    }
}

/// Build `h_{a,b}` for a class with `a >= b`; classes with `a < b` are the
/// mirror image and are handled by the `(b, a)` call.
pub fn build_hab(level: &LevelKernel, a: usize, b: usize) -> Result<BlockKernel> {
    let bs = 4 * level.ell + 2;
    if a < b || b < 1 || a > bs {
        return Err(Error::Argument(format!(
            "class indices must satisfy 1 <= b <= a <= {bs}, got a={a}, b={b}"
        )));
    }
    Ok(BlockKernel {
        level: level.clone(),
        class: ClassId { a, b },
    })
}

/// The block data vector `eps^{a,b}_u`: a contiguous `(4l+2)`-slice of the
/// innovation stream. Distinct `u` yield disjoint slices.
pub fn extract_block_vectors(
    strip: &InnovationStrip,
    ell: usize,
    a: usize,
    b: usize,
    u: i64,
) -> Result<Vec<f64>> {
    let bs = 4 * ell + 2;
    if a < b || b < 1 || a > bs {
        return Err(Error::Argument(format!(
            "class indices must satisfy 1 <= b <= a <= {bs}, got a={a}, b={b}"
        )));
    }
    let start = block_start(ell, ClassId { a, b }, u);
    let end = start + bs as i64 - 1;
    if !strip.covers(start, end) {
        return Err(Error::Argument(format!(
            "innovation strip does not cover block [{start}, {end}]"
        )));
    }
    Ok((start..=end).map(|i| strip.get(i)).collect())
}
