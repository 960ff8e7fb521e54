//! Training: precomputed factor algebra, the CCCP loop and reference solvers.
//!
//! With `K ≈ PPᵀ` every CCCP subproblem is an `r × r` system with the fixed
//! matrix `J = mλI + PᵀP − (1/m)(Pᵀe)(Pᵀe)ᵀ`. `J` is factored once, so an
//! iteration costs `O(|S_t|·r)` for the coefficient update plus `O(m·r)` for
//! the residuals, where `S_t` is the set of samples currently treated as
//! outliers (nonzero `γ`).

mod cccp;
mod dense;
mod precompute;
mod reweighted;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossParams, DEFAULT_SMOOTHING};

pub use cccp::{
    cccp_step, cccp_step_direct, objective, train, train_annealed, train_detailed, train_plain, StepResult,
    TrainOutput, TrainState,
};
pub use dense::{dense_reference_solve, dense_reference_train, DenseSolution, DENSE_MAX_SAMPLES};
pub use precompute::{gram_chunked, precompute, Precomputed, GRAM_CHUNK_ROWS};
pub use reweighted::weighted_lssvm;

/// `|γ_i|` above this counts as a member of the outlier set `S_t`.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// `J` with a larger condition estimate is rejected.
pub const MAX_CONDITION: f64 = 1e14;

pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Annealing schedule for the truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anneal {
    /// Multiplier in `(0, 1)`; also sets the initial `τ = δ·max|ξ|`.
    pub delta: f64,
    pub tau_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// The product `mλ`.
    pub lambda_m: f64,
    pub tau: f64,
    pub p: f64,
    pub epsilon: f64,
    pub rank: usize,
    pub max_iter: usize,
    pub anneal: Option<Anneal>,
    /// Pivoted Cholesky early-stop threshold; `None` means `1e-12·m`.
    pub pivot_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(lambda_m: f64, tau: f64, rank: usize) -> Self {
        SolverConfig {
            lambda_m,
            tau,
            p: DEFAULT_SMOOTHING,
            epsilon: DEFAULT_EPSILON,
            rank,
            max_iter: DEFAULT_MAX_ITER,
            anneal: None,
            pivot_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("mλ", self.lambda_m)?;
        positive("p", self.p)?;
        positive("epsilon", self.epsilon)?;
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(a) = self.anneal {
            if !(a.delta > 0.0 && a.delta < 1.0) {
                return Err(Error::invalid(format!(
                    "anneal delta must lie in (0, 1), got {}",
                    a.delta
                )));
            }
            positive("tau_min", a.tau_min)?;
        }
        if let Some(tol) = self.pivot_tol {
            if !(tol >= 0.0) {
                return Err(Error::invalid(format!("pivot tolerance must be >= 0, got {tol}")));
            }
        }
        Ok(())
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams {
            tau: self.tau,
            p: self.p,
        }
    }
}

/// Per-run training trace, serializable to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖γ^(t+1) − γ^(t)‖₂` per iteration.
    pub gamma_change: Vec<f64>,
    /// Smoothed objective after each iteration.
    pub objective: Vec<f64>,
    /// `|S_t|` of the `γ` used by each iteration.
    pub support_size: Vec<usize>,
    /// Truncation level in force at each iteration.
    pub tau: Vec<f64>,
    pub rank: usize,
    pub n_sv: usize,
    pub wall_ms: f64,
}

impl TrainReport {
    /// The report with its wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrainReport {
        TrainReport {
            wall_ms: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
