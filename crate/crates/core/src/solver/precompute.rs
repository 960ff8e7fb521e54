use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::{MAX_CONDITION, SUPPORT_THRESHOLD};
use crate::error::{Error, Result};
use crate::lowrank::LowRankFactor;

/// Rows per chunk in the parallel `PᵀP` reduction. Fixed, so results do not
/// depend on the number of worker threads.
pub const GRAM_CHUNK_ROWS: usize = 1024;

/// Everything the CCCP iteration reuses across iterations.
#[derive(Debug, Clone)]
pub struct Precomputed {
    factor: LowRankFactor,
    y: DVector<f64>,
    y_sum: f64,
    lambda_m: f64,
    j: DMatrix<f64>,
    j_chol: Cholesky<f64, Dyn>,
    g: DMatrix<f64>,
    p_hat: DVector<f64>,
    alpha_ls: DVector<f64>,
    upsilon_ls: DVector<f64>,
    p_b: DMatrix<f64>,
    p_b_lu: Option<LU<f64, Dyn, Dyn>>,
}

/// `PᵀP` as an ordered sum of row-chunk Gram matrices.
pub fn gram_chunked(p: &DMatrix<f64>, n_chunks: usize) -> DMatrix<f64> {
    let (m, r) = p.shape();
    let n_chunks = n_chunks.clamp(1, m.max(1));
    let size = m.div_ceil(n_chunks);
    let starts: Vec<usize> = (0..m).step_by(size.max(1)).collect();
    let parts: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&a| {
            let rows = p.rows(a, size.min(m - a));
            rows.tr_mul(&rows)
        })
        .collect();
    parts.into_iter().fold(DMatrix::zeros(r, r), |acc, part| acc + part)
}

/// Assembles `J`, factors it, and forms `G = (P_Bᵀ)⁻¹J⁻¹`, `P̂ = Pᵀe` and the
/// primal-LSSVM solution `α_LS`.
pub fn precompute(factor: &LowRankFactor, y: &[f64], lambda_m: f64) -> Result<Precomputed> {
    let m = factor.nrows();
    let r = factor.rank();
    if y.len() != m {
        return Err(Error::invalid(format!(
            "{} targets for a factor with {m} rows",
            y.len()
        )));
    }
    if !(lambda_m > 0.0 && lambda_m.is_finite()) {
        return Err(Error::invalid(format!("mλ must be positive, got {lambda_m}")));
    }
    let p = factor.p();
    let p_hat = p.row_sum().transpose();
    let gram = gram_chunked(p, m.div_ceil(GRAM_CHUNK_ROWS));
    let mut j = gram - (&p_hat * p_hat.transpose()) / m as f64;
    for i in 0..r {
        j[(i, i)] += lambda_m;
    }
    // Exact symmetry; the rank-one update can leave rounding asymmetry.
    j = (&j + j.transpose()) * 0.5;

    let singular = |detail: String| {
        Error::numerical(format!(
            "J is numerically singular ({detail}); increase the regularization mλ (currently {lambda_m:e})"
        ))
    };
    let j_chol = Cholesky::new(j.clone()).ok_or_else(|| singular("Cholesky factorization failed".into()))?;
    let l_diag = j_chol.l_dirty().diagonal();
    let cond = (l_diag.max() / l_diag.min()).powi(2);
    if !(cond <= MAX_CONDITION) {
        return Err(singular(format!("condition estimate {cond:e}")));
    }

    let p_b = factor.landmark_block();
    let p_b_lu = if factor.is_triangular() {
        None
    } else {
        Some(p_b.transpose().lu())
    };
    let j_inv = j_chol.inverse();
    let g = solve_landmark_transpose(&p_b, p_b_lu.as_ref(), &j_inv)?;

    let y = DVector::from_column_slice(y);
    let y_sum = y.sum();
    let rhs = p.tr_mul(&y) - &p_hat * (y_sum / m as f64);
    let alpha_ls = &g * &rhs;
    let upsilon_ls = j_chol.solve(&rhs);
    if alpha_ls.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("primal LSSVM solution is not finite"));
    }

    Ok(Precomputed {
        factor: factor.clone(),
        y,
        y_sum,
        lambda_m,
        j,
        j_chol,
        g,
        p_hat,
        alpha_ls,
        upsilon_ls,
        p_b,
        p_b_lu,
    })
}

/// Solves `P_Bᵀ X = rhs`: back substitution when `P_B` is lower triangular,
/// LU otherwise.
fn solve_landmark_transpose(
    p_b: &DMatrix<f64>,
    lu: Option<&LU<f64, Dyn, Dyn>>,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let out = match lu {
        None => p_b.tr_solve_lower_triangular(rhs),
        Some(lu) => lu.solve(rhs),
    };
    out.filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::numerical("landmark block P_B is singular"))
}

impl Precomputed {
    pub fn factor(&self) -> &LowRankFactor {
        &self.factor
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn lambda_m(&self) -> f64 {
        self.lambda_m
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `P̂ = Pᵀe`
    pub fn p_hat(&self) -> &DVector<f64> {
        &self.p_hat
    }

    pub fn alpha_ls(&self) -> &DVector<f64> {
        &self.alpha_ls
    }

    pub fn upsilon_ls(&self) -> &DVector<f64> {
        &self.upsilon_ls
    }

    pub(crate) fn y_sum(&self) -> f64 {
        self.y_sum
    }

    /// `J⁻¹ v` through the stored factorization.
    pub fn solve_j(&self, v: &DVector<f64>) -> DVector<f64> {
        self.j_chol.solve(v)
    }

    /// `α_B = (P_Bᵀ)⁻¹ υ`.
    pub fn alpha_from_upsilon(&self, upsilon: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = DMatrix::from_column_slice(upsilon.len(), 1, upsilon.as_slice());
        let x = solve_landmark_transpose(&self.p_b, self.p_b_lu.as_ref(), &rhs)?;
        Ok(x.column(0).into_owned())
    }

    /// `P_Sᵀ γ_S − (eᵀγ/m)·P̂` over the support of `gamma`, with `|S|`.
    pub(crate) fn gamma_correction(&self, gamma: &[f64]) -> (DVector<f64>, usize, f64) {
        let p = self.factor.p();
        let support: Vec<usize> = (0..gamma.len())
            .filter(|&i| gamma[i].abs() > SUPPORT_THRESHOLD)
            .collect();
        let gamma_sum: f64 = gamma.iter().sum();
        let mean = gamma_sum / self.m() as f64;
        let delta = DVector::from_fn(p.ncols(), |t, _| {
            let col = p.column(t);
            let v: f64 = support.iter().map(|&i| col[i] * gamma[i]).sum();
            v - mean * self.p_hat[t]
        });
        (delta, support.len(), gamma_sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Task};
    use crate::kernels::KernelSpec;
    use crate::lowrank::{default_tolerance, pivoted_cholesky};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factor(m: usize, r: usize, seed: u64) -> LowRankFactor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..m * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = Dataset::new(f, 3, vec![0.0; m], Task::Regression).unwrap();
        pivoted_cholesky(&d, &KernelSpec::gaussian(1.5).unwrap(), r, default_tolerance(m)).unwrap()
    }

    #[test]
    fn constant_column_is_centered_away() {
        let m = 6;
        let p = DMatrix::from_element(m, 1, 1.0);
        let factor = LowRankFactor::from_parts(p, vec![0], true).unwrap();
        let y = [0.3, -1.0, 2.0, 0.5, 0.0, 1.7];
        let lambda_m = 0.25;
        let pre = precompute(&factor, &y, lambda_m).unwrap();
        assert!((pre.j()[(0, 0)] - lambda_m).abs() < 1e-14);
        assert!(pre.alpha_ls()[0].abs() < 1e-14);
    }

    #[test]
    fn j_minus_regularizer_is_psd() {
        for (seed, lambda_m) in [(1, 1e-4), (2, 1e-2), (3, 1.0), (4, 10.0)] {
            let factor = random_factor(40, 8, seed);
            let pre = precompute(&factor, &vec![1.0; 40], lambda_m).unwrap();
            // Oracle: centered Gram matrix built directly.
            let p = factor.p();
            let mean = p.row_mean();
            let centered = DMatrix::from_fn(40, factor.rank(), |i, t| p[(i, t)] - mean[t]);
            let cg = centered.transpose() * &centered;
            let mut shifted = pre.j().clone();
            for i in 0..factor.rank() {
                shifted[(i, i)] -= lambda_m;
            }
            assert!((&shifted - &cg).amax() < 1e-10);
            assert!(shifted.symmetric_eigenvalues().min() >= -1e-8);
        }
    }

    #[test]
    fn g_matches_definition() {
        let factor = random_factor(30, 6, 7);
        let pre = precompute(&factor, &vec![0.5; 30], 0.1).unwrap();
        let pbt = factor.landmark_block().transpose();
        let expect = pbt.try_inverse().unwrap() * pre.j().clone().try_inverse().unwrap();
        assert!((pre.g() - expect).amax() < 1e-8 * pre.g().amax().max(1.0));
    }

    #[test]
    fn gram_is_chunk_count_independent() {
        let factor = random_factor(300, 10, 9);
        let base = factor.p().transpose() * factor.p();
        for chunks in [1, 2, 3, 7, 64, 300] {
            assert!(
                (gram_chunked(factor.p(), chunks) - &base).amax() <= 1e-10,
                "{chunks} chunks"
            );
        }
    }

    #[test]
    fn singular_j_is_reported() {
        // Collinear rows: the centered Gram matrix has rank one.
        let p = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, 2.0]);
        let factor = LowRankFactor::from_parts(p, vec![0, 1], true).unwrap();
        assert!(precompute(&factor, &[1.0, 2.0, 3.0], 1e-300).is_err());
        assert!(precompute(&factor, &[1.0, 2.0], 1.0).is_err());
        assert!(precompute(&factor, &[1.0, 2.0, 3.0], 0.0).is_err());
    }
}
