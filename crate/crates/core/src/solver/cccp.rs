use std::time::Instant;

use nalgebra::DVector;

use super::precompute::{precompute, Precomputed};
use super::{SolverConfig, TrainReport, SUPPORT_THRESHOLD};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{self, LossParams};
use crate::lowrank::{default_tolerance, pivoted_cholesky, LowRankFactor};
use crate::model::Model;

/// One CCCP update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// `υ = P_Bᵀ α_B`
    pub upsilon: DVector<f64>,
    pub alpha_b: DVector<f64>,
    pub b: f64,
    /// Training residuals `y − Pυ − b`.
    pub xi: DVector<f64>,
    /// `|S_t|` for the input `γ`.
    pub support_size: usize,
}

/// Iterate state after the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Number of completed iterations.
    pub t: usize,
    /// `γ` computed from the final residuals.
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub b: f64,
    /// Indices with `|γ_i| > 1e-12`.
    pub support: Vec<usize>,
    /// Truncation level at termination.
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Model,
    pub report: TrainReport,
    pub state: TrainState,
    pub factor: LowRankFactor,
}

/// `υ`, `b` and `ξ` for a given `γ` via the sparse correction
/// `υ = υ_LS − J⁻¹(P_Sᵀγ_S − (eᵀγ/m)P̂)`.
fn step_core(pre: &Precomputed, gamma: &[f64]) -> (DVector<f64>, DVector<f64>, f64, DVector<f64>, usize) {
    let m = pre.m() as f64;
    let (delta, support_size, gamma_sum) = pre.gamma_correction(gamma);
    let upsilon = pre.upsilon_ls() - pre.solve_j(&delta);
    let b = (pre.y_sum() - gamma_sum - pre.p_hat().dot(&upsilon)) / m;
    let mut xi = pre.targets() - pre.factor().p() * &upsilon;
    xi.add_scalar_mut(-b);
    (delta, upsilon, b, xi, support_size)
}

/// CCCP update through the sparse fast path:
/// `α_B = α_LS − G(P_Sᵀγ_S − (eᵀγ/m)P̂)`, `b = (eᵀ(y − γ) − P̂ᵀυ)/m`.
pub fn cccp_step(pre: &Precomputed, gamma: &[f64]) -> Result<StepResult> {
    check_gamma(pre, gamma)?;
    let (delta, upsilon, b, xi, support_size) = step_core(pre, gamma);
    let alpha_b = pre.alpha_ls() - pre.g() * &delta;
    Ok(StepResult {
        upsilon,
        alpha_b,
        b,
        xi,
        support_size,
    })
}

/// CCCP update through the direct formula
/// `α_B = (P_Bᵀ)⁻¹J⁻¹Pᵀ(y − γ − mean(y − γ)·e)`,
/// `b = (eᵀ(y − γ) − eᵀPP_Bᵀα_B)/m`. Reference for [`cccp_step`].
pub fn cccp_step_direct(pre: &Precomputed, gamma: &[f64]) -> Result<StepResult> {
    check_gamma(pre, gamma)?;
    let m = pre.m() as f64;
    let p = pre.factor().p();
    let z = pre.targets() - DVector::from_column_slice(gamma);
    let z_sum = z.sum();
    let centered = z.add_scalar(-z_sum / m);
    let upsilon = pre.solve_j(&p.tr_mul(&centered));
    let alpha_b = pre.alpha_from_upsilon(&upsilon)?;
    let fitted = p * (pre.factor().landmark_block().transpose() * &alpha_b);
    let b = (z_sum - fitted.sum()) / m;
    let xi = (pre.targets() - fitted).add_scalar(-b);
    let support_size = gamma.iter().filter(|g| g.abs() > SUPPORT_THRESHOLD).count();
    Ok(StepResult {
        upsilon,
        alpha_b,
        b,
        xi,
        support_size,
    })
}

fn check_gamma(pre: &Precomputed, gamma: &[f64]) -> Result<()> {
    if gamma.len() != pre.m() {
        return Err(Error::invalid(format!(
            "gamma has length {}, expected {}",
            gamma.len(),
            pre.m()
        )));
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("gamma contains non-finite entries"));
    }
    Ok(())
}

/// Smoothed objective in factor coordinates:
/// `(λ/2)‖υ‖² + (1/m)Σ (½ξ² − L̄₂(ξ))` with `λ = mλ / m`.
fn objective_factor(upsilon: &DVector<f64>, xi: &DVector<f64>, lambda_m: f64, params: LossParams) -> f64 {
    let m = xi.len() as f64;
    let lambda = lambda_m / m;
    let loss: f64 = xi.iter().map(|&v| losses::smoothed_truncated_loss(v, params)).sum();
    0.5 * lambda * upsilon.norm_squared() + loss / m
}

/// Smoothed training objective of a model on `dataset`:
/// `(λ/2)·α_Bᵀ K_BB α_B + (1/m)Σ (½ξ_i² − L̄₂(ξ_i))` with `ξ_i = y_i − f(x_i)`.
///
/// For a model trained on `dataset` this equals the objective tracked in
/// the training report, since `PPᵀ` reproduces the landmark columns of `K`.
pub fn objective(model: &Model, dataset: &Dataset, config: &SolverConfig) -> Result<f64> {
    let m = dataset.len() as f64;
    let lambda = config.lambda_m / m;
    let r = model.n_landmarks();
    let alpha = model.alpha();
    let mut quad = 0.0;
    for a in 0..r {
        for c in 0..r {
            quad += alpha[a] * alpha[c] * model.kernel().eval(model.landmark(a), model.landmark(c))?;
        }
    }
    let params = LossParams::new(config.tau, config.p)?;
    let mut loss = 0.0;
    for (x, y) in dataset.rows().zip(dataset.targets()) {
        loss += losses::smoothed_truncated_loss(y - model.predict_raw(x)?, params);
    }
    Ok(0.5 * lambda * quad + loss / m)
}

fn factor_for(dataset: &Dataset, spec: &KernelSpec, config: &SolverConfig) -> Result<LowRankFactor> {
    config.validate()?;
    spec.validate()?;
    let m = dataset.len();
    if config.rank > m {
        return Err(Error::invalid(format!(
            "rank r = {} exceeds the number of samples m = {m}",
            config.rank
        )));
    }
    let tol = config.pivot_tol.unwrap_or_else(|| default_tolerance(m));
    pivoted_cholesky(dataset, spec, config.rank, tol)
}

fn build_model(
    dataset: &Dataset,
    spec: &KernelSpec,
    factor: &LowRankFactor,
    alpha_b: &DVector<f64>,
    b: f64,
) -> Result<Model> {
    let landmarks: Vec<f64> = factor
        .landmarks()
        .iter()
        .flat_map(|&i| dataset.row(i).iter().copied())
        .collect();
    Model::new(
        landmarks,
        dataset.n_features(),
        alpha_b.iter().copied().collect(),
        b,
        *spec,
        dataset.task(),
    )
}

/// Trains a sparse robust LSSVM: factor the kernel, precompute, then iterate
/// CCCP updates from `γ = 0` until `‖γ^(t+1) − γ^(t)‖₂ < ε` or `max_iter`.
/// With `config.anneal` set the truncation level is annealed as in
/// [`train_annealed`].
pub fn train(dataset: &Dataset, spec: &KernelSpec, config: &SolverConfig) -> Result<(Model, TrainReport)> {
    let out = train_detailed(dataset, spec, config)?;
    Ok((out.model, out.report))
}

/// [`train`] with annealing required.
pub fn train_annealed(dataset: &Dataset, spec: &KernelSpec, config: &SolverConfig) -> Result<(Model, TrainReport)> {
    if config.anneal.is_none() {
        return Err(Error::invalid("train_annealed requires an annealing schedule"));
    }
    train(dataset, spec, config)
}

/// Primal LSSVM on the same low-rank factor: the first CCCP iterate.
pub fn train_plain(dataset: &Dataset, spec: &KernelSpec, config: &SolverConfig) -> Result<(Model, TrainReport)> {
    let plain = SolverConfig {
        max_iter: 1,
        anneal: None,
        ..config.clone()
    };
    let out = train_detailed(dataset, spec, &plain)?;
    let mut report = out.report;
    // A single linear solve; there is nothing left to converge.
    report.converged = true;
    Ok((out.model, report))
}

/// [`train`] returning the final iterate state and the factor as well.
pub fn train_detailed(dataset: &Dataset, spec: &KernelSpec, config: &SolverConfig) -> Result<TrainOutput> {
    let start = Instant::now();
    let factor = factor_for(dataset, spec, config)?;
    let pre = precompute(&factor, dataset.targets(), config.lambda_m)?;
    let (alpha_b, state, mut report) = run_cccp(&pre, config)?;
    let model = build_model(dataset, spec, &factor, &alpha_b, state.b)?;
    report.n_sv = model.n_sv();
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(TrainOutput {
        model,
        report,
        state,
        factor,
    })
}

fn run_cccp(pre: &Precomputed, config: &SolverConfig) -> Result<(DVector<f64>, TrainState, TrainReport)> {
    let m = pre.m();
    let mut gamma = vec![0.0; m];
    let mut tau = config.tau;
    let mut report = TrainReport {
        iterations: 0,
        converged: false,
        gamma_change: Vec::new(),
        objective: Vec::new(),
        support_size: Vec::new(),
        tau: Vec::new(),
        rank: pre.factor().rank(),
        n_sv: 0,
        wall_ms: 0.0,
    };
    let mut last_small = false;
    let mut final_delta = None;
    let mut state = None;

    for it in 1..=config.max_iter {
        let (delta, upsilon, b, xi, support_size) = step_core(pre, &gamma);
        if let Some(a) = config.anneal {
            if it == 1 {
                let max_abs = xi.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                tau = (a.delta * max_abs).max(a.tau_min);
            } else if last_small && tau > a.tau_min {
                tau = (tau * a.delta).max(a.tau_min);
            }
        }
        let params = LossParams { tau, p: config.p };
        let next: Vec<f64> = xi.iter().map(|&v| losses::gamma(v, params)).collect();
        let change = next
            .iter()
            .zip(&gamma)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if !change.is_finite() {
            return Err(Error::numerical(format!("CCCP iterate diverged at iteration {it}")));
        }

        report.iterations = it;
        report.gamma_change.push(change);
        report
            .objective
            .push(objective_factor(&upsilon, &xi, pre.lambda_m(), params));
        report.support_size.push(support_size);
        report.tau.push(tau);

        last_small = change < config.epsilon;
        let done = last_small && config.anneal.is_none_or(|a| tau <= a.tau_min);
        final_delta = Some(delta);
        state = Some(TrainState {
            t: it,
            support: (0..m).filter(|&i| next[i].abs() > SUPPORT_THRESHOLD).collect(),
            gamma: std::mem::replace(&mut gamma, next),
            xi: xi.iter().copied().collect(),
            upsilon: upsilon.iter().copied().collect(),
            b,
            tau,
        });
        if done {
            report.converged = true;
            break;
        }
    }

    let mut state = state.expect("max_iter >= 1");
    // `state.gamma` currently holds the γ that produced the final iterate;
    // report the one computed from the final residuals instead.
    std::mem::swap(&mut state.gamma, &mut gamma);
    let delta = final_delta.expect("max_iter >= 1");
    let alpha_b = pre.alpha_ls() - pre.g() * &delta;
    Ok((alpha_b, state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic_linear, make_synthetic_regression, Task};
    use crate::lowrank::LowRankFactor;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pre(m: usize, r: usize, seed: u64) -> (Precomputed, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = make_synthetic_regression(m, 2, seed).unwrap();
        let factor = pivoted_cholesky(&d, &KernelSpec::gaussian(2.0).unwrap(), r, default_tolerance(m)).unwrap();
        let pre = precompute(&factor, d.targets(), 10f64.powf(rng.random_range(-3.0..0.0))).unwrap();
        let gamma = (0..m)
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.random_range(-2.0..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        (pre, gamma)
    }

    #[test]
    fn zero_gamma_gives_primal_lssvm() {
        let (pre, _) = random_pre(40, 10, 1);
        let step = cccp_step(&pre, &vec![0.0; 40]).unwrap();
        assert_eq!(&step.alpha_b, pre.alpha_ls());
        assert_eq!(&step.upsilon, pre.upsilon_ls());
        assert_eq!(step.support_size, 0);
    }

    #[test]
    fn fast_and_direct_paths_agree() {
        for seed in 0..20 {
            let m = 20 + (seed as usize * 9) % 180;
            let (pre, gamma) = random_pre(m, 1 + m / 10, seed);
            let fast = cccp_step(&pre, &gamma).unwrap();
            let direct = cccp_step_direct(&pre, &gamma).unwrap();
            let scale = fast.alpha_b.amax().max(1.0);
            assert!((&fast.alpha_b - &direct.alpha_b).amax() <= 1e-10 * scale, "seed {seed}");
            assert!((fast.b - direct.b).abs() <= 1e-10);
            assert!((&fast.xi - &direct.xi).amax() <= 1e-10);
        }
    }

    #[test]
    fn handcrafted_step_matches_dense_reduced_system() {
        // m = 4, r = 2, lower-triangular landmark rows 0 and 2.
        let p = DMatrix::from_row_slice(4, 2, &[1.2, 0.0, 0.4, 0.3, 0.5, 0.9, -0.2, 0.7]);
        let factor = LowRankFactor::from_parts(p.clone(), vec![0, 2], true).unwrap();
        let y = [1.0, -1.0, 0.5, 2.0];
        let gamma = [0.0, -0.8, 0.0, 1.1];
        let lambda_m = 0.3;
        let pre = precompute(&factor, &y, lambda_m).unwrap();
        let step = cccp_step(&pre, &gamma).unwrap();

        // Oracle: (mλI + PᵀP − (1/m)Pᵀeeᵀ P) P_Bᵀ α_B = Pᵀ(z − mean(z) e), z = y − γ.
        let m = 4.0;
        let e = DMatrix::from_element(4, 1, 1.0);
        let pte = p.transpose() * &e;
        let a = DMatrix::identity(2, 2) * lambda_m + p.transpose() * &p - &pte * pte.transpose() / m;
        let z: Vec<f64> = y.iter().zip(&gamma).map(|(a, b)| a - b).collect();
        let zbar = z.iter().sum::<f64>() / m;
        let zc = DMatrix::from_iterator(4, 1, z.iter().map(|v| v - zbar));
        let pbt = DMatrix::from_row_slice(2, 2, &[1.2, 0.5, 0.0, 0.9]);
        let alpha = (a * pbt).lu().solve(&(p.transpose() * zc)).unwrap();
        for t in 0..2 {
            assert!((step.alpha_b[t] - alpha[(t, 0)]).abs() <= 1e-10);
        }
    }

    #[test]
    fn clean_separable_blobs_converge_quickly() {
        let (train_set, _) = make_synthetic_linear(60, 10, 0, 0).unwrap();
        let cfg = SolverConfig::new(1e-2, 1.5, 2);
        let out = train_detailed(&train_set, &KernelSpec::Linear, &cfg).unwrap();
        assert!(out.report.converged);
        assert!(out.report.iterations <= 10);
        assert_eq!(out.model.n_landmarks(), 2);
    }

    #[test]
    fn objective_is_nonincreasing() {
        let d = make_synthetic_regression(120, 2, 4).unwrap();
        let noisy = crate::data::inject_target_noise(&d, 0.1, 4).unwrap().dataset;
        let mut cfg = SolverConfig::new(1e-2, 0.2, 30);
        cfg.epsilon = 1e-8;
        let (_, rep) = train(&noisy, &KernelSpec::gaussian(1.0).unwrap(), &cfg).unwrap();
        let slack = 2.0 * 2f64.ln() / cfg.p + 1e-9;
        for w in rep.objective.windows(2) {
            assert!(w[1] <= w[0] + slack, "{} -> {}", w[0], w[1]);
        }
        assert!(rep.converged);
    }

    #[test]
    fn objective_from_model_matches_report() {
        let d = make_synthetic_regression(80, 2, 6).unwrap();
        let cfg = SolverConfig::new(0.05, 0.3, 12);
        let (model, rep) = train(&d, &KernelSpec::gaussian(1.0).unwrap(), &cfg).unwrap();
        let h = objective(&model, &d, &cfg).unwrap();
        assert!(
            (h - rep.objective.last().unwrap()).abs() < 1e-8,
            "{h} vs {:?}",
            rep.objective.last()
        );
    }

    #[test]
    fn objective_examples() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![0.0, 0.0], Task::Regression).unwrap();
        let zero = Model::new(vec![1.0], 1, vec![0.0], 0.0, KernelSpec::Linear, Task::Regression).unwrap();
        let cfg = SolverConfig::new(1.0, 1.0, 1);
        assert!(objective(&zero, &d, &cfg).unwrap().abs() < 1e-300);

        let far = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![3.0, -5.0], Task::Regression).unwrap();
        let h = objective(&zero, &far, &cfg).unwrap();
        assert!((h - 0.5).abs() <= 2f64.ln() / cfg.p);
    }

    #[test]
    fn state_residuals_are_consistent() {
        let d = make_synthetic_regression(60, 2, 2).unwrap();
        let cfg = SolverConfig::new(0.1, 0.2, 15);
        let out = train_detailed(&d, &KernelSpec::gaussian(1.0).unwrap(), &cfg).unwrap();
        let p = out.factor.p();
        let ups = DVector::from_column_slice(&out.state.upsilon);
        let fitted = p * ups;
        for i in 0..d.len() {
            let expect = d.targets()[i] - fitted[i] - out.state.b;
            assert!((out.state.xi[i] - expect).abs() <= 1e-10);
            // The model reproduces the training predictions of the factor.
            let f = out.model.predict_raw(d.row(i)).unwrap();
            assert!((d.targets()[i] - f - out.state.xi[i]).abs() <= 1e-8);
        }
        assert!(out.state.support.len() <= d.len());
    }

    #[test]
    fn max_iter_is_reported_not_raised() {
        let d = make_synthetic_regression(60, 2, 3).unwrap();
        let noisy = crate::data::inject_target_noise(&d, 0.2, 3).unwrap().dataset;
        let mut cfg = SolverConfig::new(1e-3, 0.1, 20);
        cfg.max_iter = 1;
        cfg.epsilon = 1e-12;
        let (_, rep) = train(&noisy, &KernelSpec::gaussian(1.0).unwrap(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn rejects_rank_above_m_and_bad_config() {
        let d = make_synthetic_regression(5, 1, 0).unwrap();
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            train(&d, &g, &SolverConfig::new(0.1, 1.0, 6)),
            Err(Error::InvalidInput(_))
        ));
        assert!(train(&d, &g, &SolverConfig::new(0.0, 1.0, 2)).is_err());
        assert!(train_annealed(&d, &g, &SolverConfig::new(0.1, 1.0, 2)).is_err());
    }
}
