//! `train`, `predict` and `eval`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use srlssvm::model::evaluate;
use srlssvm::solver::train;
use srlssvm::{EvalReport, Model, Task, TrainReport};

use crate::config::{Format, Settings, SYNTHETIC};
use crate::input::{load, pad_features, read_dataset};
use crate::output::{csv, emit, to_json};
use crate::CliError;

pub const DEFAULT_MODEL_PATH: &str = "model.json";

fn report_csv(report: &TrainReport) -> String {
    let rows: Vec<Vec<String>> = (0..report.iterations)
        .map(|t| {
            vec![
                (t + 1).to_string(),
                report.gamma_change[t].to_string(),
                report.objective[t].to_string(),
                report.support_size[t].to_string(),
                report.tau[t].to_string(),
            ]
        })
        .collect();
    csv(
        &["iteration", "gamma_change", "objective", "support_size", "tau"],
        &rows,
    )
}

fn metric_line(report: &EvalReport) -> String {
    match (report.accuracy, report.rmse) {
        (Some(acc), _) => format!("test accuracy {:.2}% on {} samples\n", 100.0 * acc, report.n_samples),
        (_, Some(rmse)) => format!("test RMSE {rmse:.4} on {} samples\n", report.n_samples),
        _ => String::new(),
    }
}

pub fn run_train(s: &Settings) -> Result<String, CliError> {
    let data = load(s)?;
    let (sigma, mlambda, tau) = s.single();
    let spec = s.kernel(sigma)?;
    let config = s.solver(mlambda, tau);
    let (model, report) = train(&data.train, &spec, &config)?;

    let model_path = s.model.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_MODEL_PATH));
    model.save(&model_path)?;
    let mut text = format!(
        "iterations {} ({}), n_sv {}, train time {:.1} ms\nmodel written to {}\n",
        report.iterations,
        if report.converged { "converged" } else { "not converged" },
        report.n_sv,
        report.wall_ms,
        model_path.display()
    );
    if !report.converged {
        eprintln!(
            "warning: no convergence within {} iterations (last γ change {:e})",
            config.max_iter,
            report.gamma_change.last().copied().unwrap_or(f64::NAN)
        );
    }
    if let Some(test) = &data.test {
        text.push_str(&metric_line(&evaluate(&model, test)?));
    }
    if let Some(out) = &s.out {
        let body = match s.format {
            Format::Json => format!("{}\n", report.to_json()),
            Format::Csv => report_csv(&report),
        };
        text.push_str(&emit(Some(out), body, "report")?);
    }
    Ok(text)
}

#[derive(Serialize)]
struct Prediction {
    index: usize,
    raw: f64,
    prediction: f64,
}

fn load_for_model(s: &Settings, model: &Model, task: Task) -> Result<srlssvm::Dataset, CliError> {
    let source = s.data_arg()?;
    let ds = if source == SYNTHETIC {
        let settings = Settings {
            task: model.task(),
            ..s.clone()
        };
        let loaded = load(&settings)?;
        loaded.test.unwrap_or(loaded.train)
    } else {
        read_dataset(source, task)?
    };
    if ds.n_features() > model.n_features() {
        return Err(srlssvm::Error::InvalidInput(format!(
            "data has {} features, model expects {}",
            ds.n_features(),
            model.n_features()
        ))
        .into());
    }
    pad_features(ds, model.n_features())
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    Ok(Model::load(path)?)
}

pub fn run_predict(s: &Settings) -> Result<String, CliError> {
    let model = load_model(s.model_arg()?)?;
    // Labels in the input are ignored, so any numeric label column parses.
    let ds = load_for_model(s, &model, Task::Regression)?;
    let preds = ds
        .rows()
        .enumerate()
        .map(|(index, x)| {
            Ok(Prediction {
                index,
                raw: model.predict_raw(x)?,
                prediction: model.predict(x)?,
            })
        })
        .collect::<Result<Vec<_>, srlssvm::Error>>()?;
    let body = match s.format {
        Format::Json => to_json(&preds),
        Format::Csv => csv(
            &["index", "raw", "prediction"],
            &preds
                .iter()
                .map(|p| vec![p.index.to_string(), p.raw.to_string(), p.prediction.to_string()])
                .collect::<Vec<_>>(),
        ),
    };
    emit(s.out.as_deref(), body, "predictions")
}

pub fn run_eval(s: &Settings) -> Result<String, CliError> {
    let model = load_model(s.model_arg()?)?;
    let ds = load_for_model(s, &model, model.task())?;
    let report = evaluate(&model, &ds)?;
    let body = match s.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let metric = report.accuracy.or(report.rmse).unwrap_or(f64::NAN);
            let name = if report.accuracy.is_some() { "accuracy" } else { "rmse" };
            csv(
                &["task", name, "n_sv", "n_samples", "predict_time_ms"],
                &[vec![
                    report.task.to_string(),
                    metric.to_string(),
                    report.n_sv.to_string(),
                    report.n_samples.to_string(),
                    report.predict_time_ms.to_string(),
                ]],
            )
        }
    };
    let mut text = metric_line(&report);
    text.push_str(&emit(s.out.as_deref(), body, "evaluation")?);
    Ok(text)
}
