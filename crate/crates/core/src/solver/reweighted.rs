use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lowrank::LowRankFactor;

/// Weighted LSSVM on a low-rank factor:
/// `min (λ/2)‖υ‖² + (1/2m) Σ ω_i (y_i − P_i υ − b)²`, returning `(α_B, b)`
/// with `α_B = (P_Bᵀ)⁻¹υ`.
///
/// With `ω_i = weight(ξ_i, τ)` taken at a CCCP fixed point this reproduces
/// the robust solution, exhibiting the truncated loss as an iteratively
/// re-weighted least-squares problem.
pub fn weighted_lssvm(
    factor: &LowRankFactor,
    y: &[f64],
    weights: &[f64],
    lambda_m: f64,
) -> Result<(DVector<f64>, f64)> {
    let (m, r) = factor.p().shape();
    if y.len() != m || weights.len() != m {
        return Err(Error::invalid("targets and weights must have one entry per row of P"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let p = factor.p();
    // Normal equations of the (r + 1)-dimensional least-squares problem.
    let mut a = DMatrix::<f64>::zeros(r + 1, r + 1);
    let mut rhs = DVector::<f64>::zeros(r + 1);
    for i in 0..m {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row: Vec<f64> = (0..r).map(|t| p[(i, t)]).chain(std::iter::once(1.0)).collect();
        for s in 0..=r {
            rhs[s] += w * row[s] * y[i];
            for t in 0..=r {
                a[(s, t)] += w * row[s] * row[t];
            }
        }
    }
    for t in 0..r {
        a[(t, t)] += lambda_m;
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::numerical("weighted LSSVM system is singular"))?;
    let upsilon = sol.rows(0, r).into_owned();
    let b = sol[r];
    let p_b = factor.landmark_block();
    let alpha = if factor.is_triangular() {
        p_b.tr_solve_lower_triangular(&upsilon)
    } else {
        p_b.transpose().lu().solve(&upsilon)
    }
    .ok_or_else(|| Error::numerical("landmark block P_B is singular"))?;
    Ok((alpha, b))
}
