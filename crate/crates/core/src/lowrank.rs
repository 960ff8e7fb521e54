//! Low-rank kernel factors `K ≈ PPᵀ`.
//!
//! [`pivoted_cholesky`] is the greedy incomplete Cholesky factorization: at
//! every step it pivots on the largest residual diagonal, evaluates that one
//! kernel column and appends the scaled residual column to `P`. Only the
//! diagonal and the `|B|` pivot columns of `K` are ever computed. The result
//! equals the Nyström approximation `K_MB K_BB⁻¹ K_MBᵀ` at the pivots `B`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{KernelColumns, KernelMatrix, KernelSpec};

/// Residual diagonals down to this value are treated as rounding noise and
/// clamped to zero; anything lower means the matrix is not PSD.
pub const NEGATIVE_DIAG_SLACK: f64 = 1e-8;
/// Residual diagonals within this distance of the maximum are ties; the
/// smallest index wins.
pub const PIVOT_TIE_TOL: f64 = 1e-12;

const PAR_ROWS: usize = 4096;

/// Default early-termination threshold for `m` samples: `1e-12 · m`.
pub fn default_tolerance(m: usize) -> f64 {
    1e-12 * m as f64
}

/// `P` (`m × r`) with pivot rows `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    p: DMatrix<f64>,
    landmarks: Vec<usize>,
    residual_trace: Option<f64>,
    trace_history: Vec<f64>,
    triangular: bool,
}

impl LowRankFactor {
    /// Wraps an explicit factor. `triangular` asserts that the rows of `p` at
    /// `landmarks` form a lower-triangular matrix with positive diagonal.
    pub fn from_parts(p: DMatrix<f64>, landmarks: Vec<usize>, triangular: bool) -> Result<Self> {
        let (m, r) = p.shape();
        if r == 0 || landmarks.len() != r {
            return Err(Error::invalid(format!(
                "factor has {r} columns but {} landmarks",
                landmarks.len()
            )));
        }
        let mut seen = vec![false; m];
        for &b in &landmarks {
            if b >= m || std::mem::replace(&mut seen[b], true) {
                return Err(Error::invalid(format!("landmark {b} is out of range or repeated")));
            }
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("factor contains non-finite entries"));
        }
        if triangular {
            for (s, &b) in landmarks.iter().enumerate() {
                if p[(b, s)] <= 0.0 || (s + 1..r).any(|t| p[(b, t)] != 0.0) {
                    return Err(Error::invalid(
                        "landmark rows are not lower triangular with positive diagonal",
                    ));
                }
            }
        }
        Ok(LowRankFactor {
            p,
            landmarks,
            residual_trace: None,
            trace_history: Vec::new(),
            triangular,
        })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Number of rows `m`.
    pub fn nrows(&self) -> usize {
        self.p.nrows()
    }

    /// Rank `r = |B|`.
    pub fn rank(&self) -> usize {
        self.landmarks.len()
    }

    /// Pivot indices `B`, in pivot order.
    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    /// `trace(K − PPᵀ)` at termination; unknown for factors built from
    /// external Nyström blocks.
    pub fn residual_trace(&self) -> Option<f64> {
        self.residual_trace
    }

    /// Residual trace before the first pivot and after each pivot step.
    pub fn trace_history(&self) -> &[f64] {
        &self.trace_history
    }

    /// Whether `P_B` is lower triangular, enabling triangular solves.
    pub fn is_triangular(&self) -> bool {
        self.triangular
    }

    /// `P_B`: the rows of `P` at the landmarks, in pivot order.
    pub fn landmark_block(&self) -> DMatrix<f64> {
        self.p.select_rows(self.landmarks.iter())
    }

    /// `(PPᵀ)_ij`
    pub fn approx_entry(&self, i: usize, j: usize) -> f64 {
        self.p.row(i).dot(&self.p.row(j))
    }

    /// Debug dump: `m,r` header, a `landmarks,...` line, then `P` row by row.
    pub fn to_csv(&self) -> String {
        let (m, r) = self.p.shape();
        let mut out = format!("{m},{r}\nlandmarks");
        for b in &self.landmarks {
            let _ = write!(out, ",{b}");
        }
        out.push('\n');
        for i in 0..m {
            for t in 0..r {
                if t > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.p[(i, t)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Pivoted Cholesky factorization of the kernel matrix of `dataset`.
///
/// Stops after `r` pivots or once the largest remaining residual diagonal is
/// at most `tol`.
pub fn pivoted_cholesky(dataset: &Dataset, spec: &KernelSpec, r: usize, tol: f64) -> Result<LowRankFactor> {
    spec.validate()?;
    pivoted_cholesky_columns(&KernelMatrix::new(spec, dataset), r, tol)
}

/// Pivoted Cholesky over any column source.
pub fn pivoted_cholesky_columns(source: &impl KernelColumns, r: usize, tol: f64) -> Result<LowRankFactor> {
    let m = source.size();
    if r == 0 || r > m {
        return Err(Error::invalid(format!("rank r = {r} must satisfy 1 <= r <= m = {m}")));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tol}")));
    }

    let mut resid = source.diag();
    let mut pivoted = vec![false; m];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut landmarks = Vec::with_capacity(r);
    let mut history = vec![resid.iter().map(|v| v.max(0.0)).sum::<f64>()];

    for step in 0..r {
        let max = (0..m)
            .filter(|&i| !pivoted[i])
            .map(|i| resid[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if max < -NEGATIVE_DIAG_SLACK {
            return Err(Error::numerical(format!(
                "kernel matrix is not positive semidefinite: largest residual diagonal {max:e} at pivot step {step}"
            )));
        }
        if max <= tol {
            break;
        }
        let j = (0..m)
            .find(|&i| !pivoted[i] && resid[i] >= max - PIVOT_TIE_TOL)
            .expect("maximum is attained");
        let pivot = resid[j].sqrt();

        let mut col = source.column(j)?;
        if col.len() != m {
            return Err(Error::invalid("kernel column has the wrong length"));
        }
        for prev in &cols {
            let scale = prev[j];
            if scale != 0.0 {
                axpy_rows(&mut col, prev, -scale);
            }
        }
        let inv = 1.0 / pivot;
        let update = |(i, c): (usize, &mut f64)| {
            if pivoted[i] {
                *c = 0.0;
            } else if i == j {
                *c = pivot;
            } else {
                *c *= inv;
            }
        };
        if m >= PAR_ROWS {
            col.par_iter_mut().enumerate().for_each(update);
        } else {
            col.iter_mut().enumerate().for_each(update);
        }

        pivoted[j] = true;
        for i in 0..m {
            if pivoted[i] {
                resid[i] = 0.0;
                continue;
            }
            resid[i] -= col[i] * col[i];
            if resid[i] < 0.0 && resid[i] >= -NEGATIVE_DIAG_SLACK {
                resid[i] = 0.0;
            }
        }
        history.push(resid.iter().map(|v| v.max(0.0)).sum());
        landmarks.push(j);
        cols.push(col);
    }

    let rank = cols.len();
    let p = DMatrix::from_fn(m, rank, |i, t| cols[t][i]);
    let residual = *history.last().expect("history is never empty");
    Ok(LowRankFactor {
        p,
        landmarks,
        residual_trace: Some(residual),
        trace_history: history,
        triangular: true,
    })
}

fn axpy_rows(y: &mut [f64], x: &[f64], a: f64) {
    if y.len() >= PAR_ROWS {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += a * xi);
    } else {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
    }
}

/// Factor from externally supplied Nyström blocks: `P = K_MB · K_BB^{-1/2}`,
/// using the symmetric inverse square root. `landmarks` names the rows of
/// `K_MB` that correspond to `K_BB`.
///
/// `P_B` is not triangular here, so the solver uses general solves.
pub fn from_nystrom(k_mb: &DMatrix<f64>, k_bb: &DMatrix<f64>, landmarks: Vec<usize>) -> Result<LowRankFactor> {
    let r = k_bb.nrows();
    if k_bb.ncols() != r || k_mb.ncols() != r {
        return Err(Error::invalid(format!(
            "K_BB is {}x{}, K_MB is {}x{}",
            k_bb.nrows(),
            k_bb.ncols(),
            k_mb.nrows(),
            k_mb.ncols()
        )));
    }
    let scale = k_bb.amax().max(f64::MIN_POSITIVE);
    if (k_bb - k_bb.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("K_BB is not symmetric"));
    }
    let eig = k_bb.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > 1e-12 * max_eig.max(0.0)) || max_eig <= 0.0 {
        return Err(Error::numerical(format!(
            "K_BB is singular or indefinite (eigenvalues in [{min_eig:e}, {max_eig:e}])"
        )));
    }
    let inv_sqrt = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    let k_bb_inv_sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    LowRankFactor::from_parts(k_mb * k_bb_inv_sqrt, landmarks, false)
}
