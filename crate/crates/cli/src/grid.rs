//! `gridsearch`: k-fold cross-validation over the `σ × mλ × τ` grid.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use srlssvm::data::{kfold_indices, normalize_minmax};
use srlssvm::model::evaluate;
use srlssvm::solver::train;
use srlssvm::{Dataset, EvalReport, Task};

use crate::config::{Format, Settings};
use crate::input::load;
use crate::output::{csv, emit, to_json, MeanStd};
use crate::CliError;

/// One grid point. `sigma` is `None` for the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuple {
    pub mlambda: f64,
    pub sigma: Option<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    #[serde(flatten)]
    pub tuple: Tuple,
    pub mean: f64,
    pub std: f64,
    pub folds_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub task: Task,
    pub metric: &'static str,
    pub folds: usize,
    /// Canonical order: ascending `mλ`, then `σ`, then `τ`.
    pub grid: Vec<GridRow>,
    pub best: GridRow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<EvalReport>,
}

/// The canonical, deduplicated grid.
pub fn grid_tuples(s: &Settings) -> Vec<Tuple> {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let sigmas: Vec<Option<f64>> = if s.linear {
        vec![None]
    } else {
        sorted(&s.sigmas).into_iter().map(Some).collect()
    };
    let mut out = Vec::new();
    for &mlambda in &sorted(&s.mlambdas) {
        for &sigma in &sigmas {
            for &tau in &sorted(&s.taus) {
                out.push(Tuple { mlambda, sigma, tau });
            }
        }
    }
    out
}

/// `Greater` when `a` should be preferred over `b`: better score, then larger
/// `mλ`, smaller `σ`, larger `τ`.
pub fn preference(a: &GridRow, b: &GridRow, task: Task) -> Ordering {
    let score = match task {
        Task::Classification => a.mean.total_cmp(&b.mean),
        Task::Regression => b.mean.total_cmp(&a.mean),
    };
    score
        .then(a.tuple.mlambda.total_cmp(&b.tuple.mlambda))
        .then(match (a.tuple.sigma, b.tuple.sigma) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            _ => Ordering::Equal,
        })
        .then(a.tuple.tau.total_cmp(&b.tuple.tau))
}

fn score(report: &EvalReport) -> f64 {
    report.accuracy.or(report.rmse).expect("evaluation yields a metric")
}

struct Fold {
    train: Dataset,
    valid: Dataset,
}

/// Normalized folds; training parts with a single class are skipped.
fn make_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>, CliError> {
    let parts = kfold_indices(data.len(), k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for (f, valid_idx) in parts.iter().enumerate() {
        let train_idx: Vec<usize> = parts
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        let mut train_idx = train_idx;
        train_idx.sort_unstable();
        let train_raw = data.subset(&train_idx)?;
        if data.task() == Task::Classification {
            let first = train_raw.targets()[0];
            if train_raw.targets().iter().all(|&y| y == first) {
                eprintln!("warning: fold {} skipped: its training part has a single class", f + 1);
                continue;
            }
        }
        let (train, spec) = normalize_minmax(&train_raw);
        let valid = spec.apply(&data.subset(valid_idx)?)?;
        folds.push(Fold { train, valid });
    }
    if folds.is_empty() {
        return Err(srlssvm::Error::InvalidInput("every cross-validation fold was skipped".into()).into());
    }
    Ok(folds)
}

fn cross_validate(s: &Settings, folds: &[Fold], t: Tuple) -> Result<GridRow, CliError> {
    let spec = s.kernel(t.sigma.unwrap_or(1.0))?;
    let config = s.solver(t.mlambda, t.tau);
    let scores = folds
        .iter()
        .map(|fold| {
            let (model, _) = train(&fold.train, &spec, &config)?;
            Ok(score(&evaluate(&model, &fold.valid)?))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let ms = MeanStd::of(&scores);
    Ok(GridRow {
        tuple: t,
        mean: ms.mean,
        std: ms.std,
        folds_used: scores.len(),
    })
}

/// Runs the search; the result is independent of the thread count.
pub fn grid_search(s: &Settings) -> Result<GridResult, CliError> {
    let data = load(s)?;
    let folds = make_folds(&data.train, s.folds, s.seed)?;
    let grid = grid_tuples(s)
        .into_par_iter()
        .map(|t| cross_validate(s, &folds, t))
        .collect::<Result<Vec<_>, _>>()?;
    let task = data.train.task();
    let best = grid
        .iter()
        .max_by(|a, b| preference(a, b, task))
        .expect("grid is nonempty")
        .clone();
    let test = match &data.test {
        Some(test) => {
            let (train_set, norm) = normalize_minmax(&data.train);
            let spec = s.kernel(best.tuple.sigma.unwrap_or(1.0))?;
            let (model, _) = train(&train_set, &spec, &s.solver(best.tuple.mlambda, best.tuple.tau))?;
            Some(evaluate(&model, &norm.apply(test)?)?)
        }
        None => None,
    };
    Ok(GridResult {
        task,
        metric: match task {
            Task::Classification => "accuracy",
            Task::Regression => "rmse",
        },
        folds: s.folds,
        grid,
        best,
        test,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn run_gridsearch(s: &Settings) -> Result<String, CliError> {
    let result = grid_search(s)?;
    let body = match s.format {
        Format::Json => to_json(&result),
        Format::Csv => {
            let rows: Vec<Vec<String>> = result
                .grid
                .iter()
                .map(|r| {
                    vec![
                        r.tuple.mlambda.to_string(),
                        opt(r.tuple.sigma),
                        r.tuple.tau.to_string(),
                        r.mean.to_string(),
                        r.std.to_string(),
                        r.folds_used.to_string(),
                        u8::from(r.tuple == result.best.tuple).to_string(),
                    ]
                })
                .collect();
            csv(
                &["mlambda", "sigma", "tau", "mean", "std", "folds_used", "selected"],
                &rows,
            )
        }
    };
    let b = &result.best;
    let mut text = format!(
        "best mlambda={} sigma={} tau={}: cv {} {}\n",
        b.tuple.mlambda,
        b.tuple.sigma.map_or_else(|| "-".to_string(), |v| v.to_string()),
        b.tuple.tau,
        result.metric,
        MeanStd {
            mean: b.mean,
            std: b.std
        }
    );
    if let Some(test) = &result.test {
        text.push_str(&format!("test {} {:.4}\n", result.metric, score(test)));
    }
    if s.out.is_none() {
        return Ok(text + &body);
    }
    text.push_str(&emit(s.out.as_deref(), body, "grid table")?);
    Ok(text)
}
