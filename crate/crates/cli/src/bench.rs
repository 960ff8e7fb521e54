//! `bench`: repeated seeded trials of outlier injection, training and
//! evaluation, summarized as `mean(std)` per method.

use rayon::prelude::*;
use serde::Serialize;
use srlssvm::data::{inject_label_outliers, inject_target_noise, normalize_minmax, split};
use srlssvm::model::evaluate;
use srlssvm::solver::{train, train_plain};
use srlssvm::Task;

use crate::config::{Format, Method, Settings};
use crate::input::load;
use crate::output::{csv, emit, to_json, MeanStd};
use crate::CliError;

/// Held-out share when no test set is given.
pub const TRAIN_FRACTION: f64 = 2.0 / 3.0;
/// Label protocol: flip a third of the pool of confidently classified points.
pub const FLIP_FRACTION: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy)]
struct Trial {
    metric: f64,
    n_sv: f64,
    iterations: f64,
    train_ms: f64,
    converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    /// Accuracy in percent, or RMSE.
    pub metric: MeanStd,
    pub n_sv: MeanStd,
    pub iterations: MeanStd,
    pub train_ms: MeanStd,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub dataset: String,
    pub task: Task,
    pub metric: &'static str,
    pub repeats: usize,
    pub outlier_rate: f64,
    pub rows: Vec<BenchRow>,
}

fn run_trial(s: &Settings, data: &crate::input::Loaded, i: usize) -> Result<Vec<Trial>, CliError> {
    let seed = s.seed.wrapping_add(i as u64);
    let (train_raw, test_raw) = match &data.test {
        Some(test) => (data.train.clone(), test.clone()),
        None => split(&data.train, TRAIN_FRACTION, seed)?,
    };
    let (clean, norm) = normalize_minmax(&train_raw);
    let test = norm.apply(&test_raw)?;
    let (sigma, mlambda, tau) = s.single();
    let spec = s.kernel(sigma)?;
    let config = s.solver(mlambda, tau);

    let train_set = if s.outlier_rate == 0.0 {
        clean
    } else {
        match clean.task() {
            Task::Classification => {
                let (reference, _) = train_plain(&clean, &spec, &config)?;
                inject_label_outliers(&clean, 3.0 * s.outlier_rate, FLIP_FRACTION, &reference, seed)?.dataset
            }
            Task::Regression => inject_target_noise(&clean, s.outlier_rate, seed)?.dataset,
        }
    };

    s.methods
        .iter()
        .map(|method| {
            let (model, report) = match method {
                Method::Srlssvm => train(&train_set, &spec, &config)?,
                Method::Lssvm => train_plain(&train_set, &spec, &config)?,
            };
            let eval = evaluate(&model, &test)?;
            let metric = match eval.accuracy {
                Some(acc) => 100.0 * acc,
                None => eval.rmse.expect("regression evaluation has an RMSE"),
            };
            Ok(Trial {
                metric,
                n_sv: model.n_sv() as f64,
                iterations: report.iterations as f64,
                train_ms: report.wall_ms,
                converged: report.converged,
            })
        })
        .collect()
}

pub fn bench(s: &Settings) -> Result<BenchResult, CliError> {
    let data = load(s)?;
    let trials = (0..s.repeats)
        .into_par_iter()
        .map(|i| run_trial(s, &data, i))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = s
        .methods
        .iter()
        .enumerate()
        .map(|(k, method)| {
            let per: Vec<Trial> = trials.iter().map(|t| t[k]).collect();
            let stat = |f: fn(&Trial) -> f64| MeanStd::of(&per.iter().map(f).collect::<Vec<_>>());
            let stalled = per.iter().filter(|t| !t.converged).count();
            if stalled > 0 {
                eprintln!(
                    "warning: {} did not converge in {stalled} of {} trials",
                    method.name(),
                    per.len()
                );
            }
            BenchRow {
                method: method.name(),
                metric: stat(|t| t.metric),
                n_sv: stat(|t| t.n_sv),
                iterations: stat(|t| t.iterations),
                train_ms: stat(|t| t.train_ms),
            }
        })
        .collect();
    let task = data.train.task();
    Ok(BenchResult {
        dataset: data.name,
        task,
        metric: match task {
            Task::Classification => "accuracy_percent",
            Task::Regression => "rmse",
        },
        repeats: s.repeats,
        outlier_rate: s.outlier_rate,
        rows,
    })
}

pub fn run_bench(s: &Settings) -> Result<String, CliError> {
    let result = bench(s)?;
    let metric = match result.task {
        Task::Classification => "accuracy",
        Task::Regression => "rmse",
    };
    let table = csv(
        &["method", metric, "n_sv", "iterations", "train_ms"],
        &result
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.method.to_string(),
                    r.metric.to_string(),
                    r.n_sv.to_string(),
                    r.iterations.to_string(),
                    r.train_ms.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    );
    match (&s.out, s.format) {
        (None, _) => Ok(table),
        (Some(out), Format::Csv) => Ok(table.clone() + &emit(Some(out), table, "bench table")?),
        (Some(out), Format::Json) => Ok(table + &emit(Some(out), to_json(&result), "bench results")?),
    }
}
