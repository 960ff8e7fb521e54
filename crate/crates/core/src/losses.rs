//! Scalar loss algebra for the truncated least-squares loss.
//!
//! `L_τ(ξ) = ½·min(ξ², τ²)` is written as the difference of the convex
//! functions `½ξ²` and [`l2_part`]. The concave part is smoothed by
//! [`smoothed_l2`], whose derivative [`gamma`] is the per-sample
//! linearization coefficient used by the CCCP iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 1e4;

/// Truncation level `tau` and smoothing sharpness `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub tau: f64,
    pub p: f64,
}

impl LossParams {
    pub fn new(tau: f64, p: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("truncation level tau must be >= 0, got {tau}")));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::invalid(format!("smoothing parameter p must be > 0, got {p}")));
        }
        Ok(LossParams { tau, p })
    }
}

/// `½ξ²`
#[inline]
pub fn squared_loss(xi: f64) -> f64 {
    0.5 * xi * xi
}

/// `½·min(ξ², τ²)`
#[inline]
pub fn truncated_loss(xi: f64, tau: f64) -> f64 {
    if xi.abs() <= tau {
        0.5 * (xi * xi)
    } else {
        0.5 * (tau * tau)
    }
}

/// Convex part removed by truncation: 0 inside `[-τ, τ]`, `½(ξ² − τ²)` outside.
#[inline]
pub fn l2_part(xi: f64, tau: f64) -> f64 {
    if xi.abs() <= tau {
        0.0
    } else {
        0.5 * (xi * xi - tau * tau)
    }
}

/// Entropy-smoothed [`l2_part`]:
/// `½max{0, u} + (1/2p)·log(1 + exp(−p|u|))` with `u = ξ² − τ²`.
///
/// Equal to `softplus(p·u)/(2p)`; the gap to [`l2_part`] never exceeds
/// `log 2 / (2p)`.
#[inline]
pub fn smoothed_l2(xi: f64, params: LossParams) -> f64 {
    let u = xi * xi - params.tau * params.tau;
    0.5 * u.max(0.0) + (-params.p * u.abs()).exp().ln_1p() / (2.0 * params.p)
}

/// Derivative of [`smoothed_l2`]:
/// `ξ · min{1, exp(p·u)} / (1 + exp(−p|u|))`.
#[inline]
pub fn smoothed_l2_grad(xi: f64, params: LossParams) -> f64 {
    let u = xi * xi - params.tau * params.tau;
    let pu = params.p * u;
    xi * pu.min(0.0).exp() / (1.0 + (-pu.abs()).exp())
}

/// CCCP linearization coefficient; ≈0 for `|ξ| < τ`, ≈ξ for `|ξ| > τ`.
#[inline]
pub fn gamma(xi: f64, params: LossParams) -> f64 {
    smoothed_l2_grad(xi, params)
}

/// Smoothed truncated loss `½ξ² − L̄₂(ξ)`.
#[inline]
pub fn smoothed_truncated_loss(xi: f64, params: LossParams) -> f64 {
    squared_loss(xi) - smoothed_l2(xi, params)
}

/// Optimal re-weighting weight: 1 for `|ξ| ≤ τ`, else 0.
#[inline]
pub fn weight(xi: f64, tau: f64) -> f64 {
    if xi.abs() <= tau {
        1.0
    } else {
        0.0
    }
}

/// Penalty on the weight, `τ²/2 · (1 − ω)₊`.
#[inline]
pub fn weight_penalty(omega: f64, tau: f64) -> f64 {
    0.5 * (tau * tau) * (1.0 - omega).max(0.0)
}

/// Re-weighted objective `½ωξ² + φ(ω)`.
#[inline]
pub fn reweighted_objective(omega: f64, xi: f64, tau: f64) -> f64 {
    0.5 * omega * (xi * xi) + weight_penalty(omega, tau)
}

/// Checks that minimizing the re-weighted objective over `ω ∈ {0, 1}`
/// reproduces the truncated loss bit-exactly at every grid point.
pub fn reweighted_identity_check(xi_grid: &[f64], tau: f64) -> bool {
    xi_grid.iter().all(|&xi| {
        let best = reweighted_objective(0.0, xi, tau).min(reweighted_objective(1.0, xi, tau));
        best == truncated_loss(xi, tau)
    })
}
