//! Pair-coverage audit: replace the level kernel by an indicator accumulator
//! and check that the degenerate parts and the remainders consume every pair
//! `(i, j)`, `i < j <= n`, exactly once — and that every index pair reaching
//! past `n` (introduced by the far-class telescoping) cancels to zero.

use std::collections::HashMap;

use super::blocks::{
    classes, for_each_block_zero_term, for_each_class_ustat_term, for_each_r11_term,
    for_each_r12_term, for_each_r2_term, for_each_r5_term, for_each_r6_term,
};

/// Result of the counting harness for one `(n, ell)`.
#[derive(Clone, Debug)]
pub struct PairCoverage {
    pub n: usize,
    pub ell: usize,
    pub ok: bool,
    /// `(i, j, net multiplicity)` for every violation
    pub violations: Vec<(i64, i64, i64)>,
}

/// Count net multiplicities over all parts of level `ell >= 1`.
pub fn audit_pair_coverage(n: usize, ell: usize) -> PairCoverage {
    assert!(ell >= 1, "the block split exists for levels >= 1");
    let m = n / (4 * ell + 2);
    let mut counts: HashMap<(i64, i64), i64> = HashMap::new();
    {
        let mut sink = |i: i64, j: i64, w: f64| {
            assert!(i < j, "unordered pair ({i}, {j})");
            assert!(i >= 1, "position below 1: ({i}, {j})");
            *counts.entry((i, j)).or_insert(0) += w as i64;
        };
        for_each_r11_term(n, ell, m, &mut sink);
        for_each_r12_term(n, ell, m, &mut sink);
        for_each_r2_term(ell, m, &mut sink);
        for class in classes(ell) {
            for_each_class_ustat_term(ell, class, m, &mut sink);
            for_each_block_zero_term(ell, class, m, &mut sink);
            if !class.is_near(ell) {
                for_each_r5_term(ell, class, m, &mut sink);
                for_each_r6_term(ell, class, m, &mut sink);
            }
        }
    }

    let mut violations = Vec::new();
    for j in 2..=n as i64 {
        for i in 1..j {
            let c = counts.get(&(i, j)).copied().unwrap_or(0);
            if c != 1 {
                violations.push((i, j, c));
            }
        }
    }
    for (&(i, j), &c) in &counts {
        if j > n as i64 && c != 0 {
            violations.push((i, j, c));
        }
    }
    violations.sort_unstable();
    PairCoverage {
        n,
        ell,
        ok: violations.is_empty(),
        violations,
    }
}
