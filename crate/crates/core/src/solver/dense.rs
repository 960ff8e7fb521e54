//! Dense reference CCCP solver. Forms the full kernel matrix, so it is
//! restricted to small problems and used as an oracle for the sparse path.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::{SolverConfig, TrainReport, SUPPORT_THRESHOLD};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{self, LossParams};
use crate::model::Model;

pub const DENSE_MAX_SAMPLES: usize = 500;

/// Solution of one dense CCCP subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    /// Expansion coefficients: `f(x) = Σ β_i k(x_i, x) + b`.
    pub beta: DVector<f64>,
    pub b: f64,
    pub xi: DVector<f64>,
}

struct DenseSystem {
    k: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    y: DVector<f64>,
}

impl DenseSystem {
    /// `[K + mλI, e; eᵀ, 0]`, factored once.
    fn new(dataset: &Dataset, spec: &KernelSpec, lambda_m: f64) -> Result<Self> {
        let m = dataset.len();
        if m > DENSE_MAX_SAMPLES {
            return Err(Error::invalid(format!(
                "dense reference solver is limited to m <= {DENSE_MAX_SAMPLES} samples, got {m}"
            )));
        }
        if !(lambda_m > 0.0) {
            return Err(Error::invalid(format!("mλ must be positive, got {lambda_m}")));
        }
        spec.validate()?;
        let k = DMatrix::from_fn(m, m, |i, j| spec.eval_unchecked(dataset.row(i), dataset.row(j)));
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(&k);
        for i in 0..m {
            a[(i, i)] += lambda_m;
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
        }
        Ok(DenseSystem {
            k,
            lu: a.lu(),
            y: DVector::from_column_slice(dataset.targets()),
        })
    }

    fn solve(&self, gamma: &DVector<f64>) -> Result<DenseSolution> {
        let m = self.y.len();
        let mut rhs = DVector::zeros(m + 1);
        rhs.rows_mut(0, m).copy_from(&(&self.y - gamma));
        let sol = self
            .lu
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::numerical("dense LSSVM system is singular"))?;
        let beta = sol.rows(0, m).into_owned();
        let b = sol[m];
        let xi = (&self.y - &self.k * &beta).add_scalar(-b);
        Ok(DenseSolution { beta, b, xi })
    }
}

/// Solves the dense LSSVM system with targets `y − γ`:
/// `[K + mλI, e; eᵀ, 0][β; b] = [y − γ; 0]`.
pub fn dense_reference_solve(
    dataset: &Dataset,
    spec: &KernelSpec,
    lambda_m: f64,
    gamma: &[f64],
) -> Result<DenseSolution> {
    if gamma.len() != dataset.len() {
        return Err(Error::invalid("gamma length does not match the dataset"));
    }
    DenseSystem::new(dataset, spec, lambda_m)?.solve(&DVector::from_column_slice(gamma))
}

/// Dense CCCP iteration with the same `γ` rule and stopping test as
/// [`train`](super::train); every training point is a potential support
/// vector. Refuses `m > 500`.
pub fn dense_reference_train(
    dataset: &Dataset,
    spec: &KernelSpec,
    config: &SolverConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    let start = Instant::now();
    let system = DenseSystem::new(dataset, spec, config.lambda_m)?;
    let params = LossParams::new(config.tau, config.p)?;
    let m = dataset.len();
    let mut gamma = DVector::zeros(m);
    let mut report = TrainReport {
        iterations: 0,
        converged: false,
        gamma_change: Vec::new(),
        objective: Vec::new(),
        support_size: Vec::new(),
        tau: Vec::new(),
        rank: m,
        n_sv: 0,
        wall_ms: 0.0,
    };
    let mut last = None;
    for it in 1..=config.max_iter {
        let sol = system.solve(&gamma)?;
        let next = sol.xi.map(|v| losses::gamma(v, params));
        let change = (&next - &gamma).norm();
        let lambda = config.lambda_m / m as f64;
        let quad = sol.beta.dot(&(&system.k * &sol.beta));
        let loss: f64 = sol.xi.iter().map(|&v| losses::smoothed_truncated_loss(v, params)).sum();
        report.iterations = it;
        report.gamma_change.push(change);
        report.objective.push(0.5 * lambda * quad + loss / m as f64);
        report
            .support_size
            .push(gamma.iter().filter(|g| g.abs() > SUPPORT_THRESHOLD).count());
        report.tau.push(config.tau);
        gamma = next;
        last = Some(sol);
        if change < config.epsilon {
            report.converged = true;
            break;
        }
    }
    let sol = last.expect("max_iter >= 1");
    let model = Model::new(
        dataset.features().to_vec(),
        dataset.n_features(),
        sol.beta.iter().copied().collect(),
        sol.b,
        *spec,
        dataset.task(),
    )?;
    report.n_sv = model.n_sv();
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((model, report))
}
