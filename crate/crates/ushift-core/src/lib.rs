//! Simulation and verification toolkit for U-statistics whose data is a
//! functional of an i.i.d. sequence.
//!
//! The library is organized around the pipeline
//!
//! * [`processes`] — innovation streams and shift functionals `X_j = f((eps_{j-k})_k)`
//!   together with their conditional truncations `f_l`;
//! * [`kernels`] — symmetric pair kernels `h`, their mean, first projection and
//!   degenerate part;
//! * [`ustat`] — pair sums `U_n`, prefix trajectories and centering constants;
//! * [`hoeffding`] — the level-wise block decomposition of a centered
//!   U-statistic into a linear part, degenerate block U-statistics and
//!   explicit remainder terms, with an exact-identity verifier;
//! * [`dependence`] — the dependence coefficients `theta_{l,p}` and `delta_l`
//!   plus the analytic bounds that dominate them;
//! * [`limits`] — Monte Carlo experiments for the law of large numbers, the
//!   bounded law of the iterated logarithm and the central limit theorem.
//!
//! Every sampling operation is a pure function of a [`rng::RngStream`], so
//! results are reproducible bit-for-bit regardless of worker scheduling.

pub mod dependence;
pub mod error;
pub mod hoeffding;
pub mod kernels;
pub mod limits;
pub mod numeric;
pub mod processes;
pub mod report;
pub mod rng;
pub mod ustat;

pub use error::{Error, Result};
pub use rng::RngStream;
