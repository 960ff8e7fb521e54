//! Sparse robust least-squares support vector machines.
//!
//! Training minimizes a regularized empirical risk built on the truncated
//! least-squares loss `½·min(ξ², τ²)`. The nonconvex loss is split into a
//! difference of convex functions, the concave part is smoothed with an
//! entropy penalty, and the resulting problem is solved by the concave-convex
//! procedure (CCCP). The kernel matrix is never formed: a greedy pivoted
//! Cholesky factorization `K ≈ PPᵀ` is built from `r` kernel columns, and every
//! CCCP iteration reduces to `r×r` algebra on that factor. The trained model
//! has at most `r` nonzero coefficients, one per pivot (landmark) point.
//!
//! Module map:
//!
//! * [`kernels`]: kernel functions, lazy kernel columns and diagonal.
//! * [`lowrank`]: pivoted Cholesky and the Nyström-block adapter.
//! * [`losses`]: truncated loss, its convex split, smoothing and weights.
//! * [`solver`]: precomputation, the CCCP loop, annealing and a dense oracle.
//! * [`model`]: prediction, metrics and model files.
//! * [`data`]: sparse text ingestion, normalization, splits, outlier
//!   injection and synthetic data.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod kernels;
pub mod losses;
pub mod lowrank;
pub mod model;
pub mod solver;

pub use data::{Dataset, Task};
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use lowrank::LowRankFactor;
pub use model::{EvalReport, Model};
pub use solver::{SolverConfig, TrainReport};
