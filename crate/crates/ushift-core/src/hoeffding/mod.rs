//! The generalized Hoeffding decomposition.
//!
//! A centered U-statistic of level-`l` data splits, per level, into
//!
//! * a **linear part**: a scaled partial sum of the centered conditional
//!   projections `psi_l(V_k)`;
//! * **degenerate block U-statistics**, one per residue class `(a, b)` of the
//!   Euclidean division by `4l+2`, each running over disjoint innovation
//!   blocks (hence independent data);
//! * explicit **remainder terms** `R_{n,1,1}, R_{n,1,2}, R_2..R_6` collecting
//!   the tail rows, the within-block pairs, the block-0 rows and the
//!   telescoping boundary terms.
//!
//! Every centering constant and conditional projection is estimated once per
//! level and reused across all parts, so the identity
//! `direct = linear + adjust + degenerate + remainders` holds to floating
//! point regardless of estimator quality. [`audit_pair_coverage`] verifies
//! that the index pairs consumed by the parts tile `{(i, j) : i < j <= n}`
//! exactly once.

mod audit;
mod blocks;
mod decompose;
mod level;

pub use audit::{audit_pair_coverage, PairCoverage};
pub use blocks::{
    block_partition, build_hab, classes, extract_block_vectors, BlockIndex, BlockKernel, ClassId,
};
pub use decompose::{
    decompose_level, generalized_decomposition, required_span, DecomposeConfig,
    GeneralizedDecomposition, LevelDecomposition, Remainders,
};
pub use level::{level_kernel, LevelKernel};

pub(crate) use decompose::level_remainders_and_r7;
pub(crate) use level::{build_level_context, ProjectionConfig};
