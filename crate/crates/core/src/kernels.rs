//! Kernel functions and on-demand kernel columns.
//!
//! The training pipeline only ever asks for the kernel diagonal and a handful
//! of columns; the full `m × m` matrix is never formed outside tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Row count above which kernel columns are evaluated in parallel.
const PAR_ROWS: usize = 4096;

/// Kernel family and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `k(x, z) = exp(−σ‖x − z‖²)`
    Gaussian { sigma: f64 },
    /// `k(x, z) = xᵀz`
    Linear,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(Error::invalid(format!(
                "gaussian kernel width must be positive, got {sigma}"
            ))),
            _ => Ok(()),
        }
    }

    /// Kernel value for two points of equal dimension.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::invalid(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                z.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("kernel arguments must have dimension at least 1"));
        }
        Ok(self.eval_unchecked(x, z))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sigma * d2).exp()
            }
            KernelSpec::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.eval(x, z)
}

/// Column `j` of the kernel matrix of `dataset`: entry `i` is `k(x_i, x_j)`.
pub fn kernel_column(spec: &KernelSpec, dataset: &Dataset, j: usize) -> Result<Vec<f64>> {
    if j >= dataset.len() {
        return Err(Error::invalid(format!(
            "kernel column {j} out of range for m = {}",
            dataset.len()
        )));
    }
    let xj = dataset.row(j);
    let mut col = vec![0.0; dataset.len()];
    if dataset.len() >= PAR_ROWS {
        col.par_iter_mut()
            .enumerate()
            .for_each(|(i, c)| *c = spec.eval_unchecked(dataset.row(i), xj));
    } else {
        for (c, xi) in col.iter_mut().zip(dataset.rows()) {
            *c = spec.eval_unchecked(xi, xj);
        }
    }
    Ok(col)
}

/// Kernel diagonal `k(x_i, x_i)`.
pub fn kernel_diag(spec: &KernelSpec, dataset: &Dataset) -> Vec<f64> {
    dataset.rows().map(|x| spec.eval_unchecked(x, x)).collect()
}

/// Kernel values between every row of `dataset` and a single point.
pub fn kernel_row(spec: &KernelSpec, dataset: &Dataset, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != dataset.n_features() {
        return Err(Error::invalid(format!(
            "point has dimension {}, dataset has {}",
            x.len(),
            dataset.n_features()
        )));
    }
    Ok(dataset.rows().map(|xi| spec.eval_unchecked(xi, x)).collect())
}

/// Source of kernel columns for low-rank factorizations.
pub trait KernelColumns {
    fn size(&self) -> usize;
    fn diag(&self) -> Vec<f64>;
    fn column(&self, j: usize) -> Result<Vec<f64>>;
}

/// The implicit kernel matrix of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct KernelMatrix<'a> {
    pub spec: &'a KernelSpec,
    pub dataset: &'a Dataset,
}

impl<'a> KernelMatrix<'a> {
    pub fn new(spec: &'a KernelSpec, dataset: &'a Dataset) -> Self {
        KernelMatrix { spec, dataset }
    }
}

impl KernelColumns for KernelMatrix<'_> {
    fn size(&self) -> usize {
        self.dataset.len()
    }

    fn diag(&self) -> Vec<f64> {
        kernel_diag(self.spec, self.dataset)
    }

    fn column(&self, j: usize) -> Result<Vec<f64>> {
        kernel_column(self.spec, self.dataset, j)
    }
}
