//! Trained models: prediction, metrics and model files.
//!
//! A model keeps only its landmark points; `f(x) = Σ_{i∈B} α_i k(x_i, x) + b`.

use std::path::Path;
use std::time::Instant;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

pub const MODEL_FORMAT: &str = "srlssvm-model";
pub const MODEL_VERSION: u32 = 1;

/// Coefficients with magnitude at most this count as zero for `n_sv`.
pub const SV_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    landmarks: Vec<f64>,
    n_features: usize,
    alpha: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    task: Task,
}

impl Model {
    /// `landmarks` is row-major `r × n_features`.
    pub fn new(
        landmarks: Vec<f64>,
        n_features: usize,
        alpha: Vec<f64>,
        bias: f64,
        kernel: KernelSpec,
        task: Task,
    ) -> Result<Self> {
        kernel.validate()?;
        if n_features == 0 || landmarks.len() != alpha.len() * n_features {
            return Err(Error::invalid(format!(
                "{} landmark values do not form {} rows of width {n_features}",
                landmarks.len(),
                alpha.len()
            )));
        }
        if alpha.iter().chain(&landmarks).any(|v| !v.is_finite()) || !bias.is_finite() {
            return Err(Error::numerical("model coefficients are not finite"));
        }
        Ok(Model {
            landmarks,
            n_features,
            alpha,
            bias,
            kernel,
            task,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of stored coefficients (`|B|`).
    pub fn n_landmarks(&self) -> usize {
        self.alpha.len()
    }

    pub fn landmark(&self, i: usize) -> &[f64] {
        &self.landmarks[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Coefficients with `|α_i| > 1e-12`.
    pub fn n_sv(&self) -> usize {
        self.alpha.iter().filter(|a| a.abs() > SV_THRESHOLD).count()
    }

    /// Same landmarks, coefficients and bias scaled by `c`.
    pub fn scaled(&self, c: f64) -> Model {
        Model {
            alpha: self.alpha.iter().map(|a| a * c).collect(),
            bias: self.bias * c,
            ..self.clone()
        }
    }

    /// Decision value `f(x)`.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        let sum: f64 = self
            .landmarks
            .chunks_exact(self.n_features)
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.kernel.eval_unchecked(xi, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// `sgn f(x)` with `sgn 0 = +1`.
    pub fn predict_class(&self, x: &[f64]) -> Result<f64> {
        if self.task != Task::Classification {
            return Err(Error::invalid("predict_class called on a regression model"));
        }
        Ok(sign(self.predict_raw(x)?))
    }

    /// Task-appropriate prediction: class label or regression value.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self.task {
            Task::Classification => self.predict_class(x),
            Task::Regression => self.predict_raw(x),
        }
    }

    pub fn predict_raw_batch(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        dataset.rows().map(|x| self.predict_raw(x)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes)
    }

    /// Serializes to the versioned JSON model format; arrays are base64 of
    /// little-endian `f64`s.
    pub fn to_bytes(&self) -> Vec<u8> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kernel: self.kernel,
            task: self.task,
            r: self.alpha.len(),
            l: self.n_features,
            bias: self.bias,
            landmarks: encode_f64s(&self.landmarks),
            alpha: encode_f64s(&self.alpha),
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("model file serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let header: FileHeader = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::ParseOffset {
                offset: 0,
                message: format!("not a model file (format {:?})", header.format),
            });
        }
        if header.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.version,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
        let landmarks = decode_f64s(bytes, &file.landmarks)?;
        let alpha = decode_f64s(bytes, &file.alpha)?;
        if alpha.len() != file.r || landmarks.len() != file.r * file.l {
            return Err(Error::ParseOffset {
                offset: 0,
                message: format!(
                    "array sizes ({} coefficients, {} landmark values) disagree with r = {}, l = {}",
                    alpha.len(),
                    landmarks.len(),
                    file.r,
                    file.l
                ),
            });
        }
        Model::new(landmarks, file.l, alpha, file.bias, file.kernel, file.task)
    }
}

/// `sgn` with the tie `sgn 0 = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kernel: KernelSpec,
    task: Task,
    r: usize,
    l: usize,
    bias: f64,
    landmarks: String,
    alpha: String,
}

fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64s(file: &[u8], encoded: &str) -> Result<Vec<f64>> {
    let field_offset = find(file, encoded.as_bytes()).unwrap_or(0);
    let raw = B64.decode(encoded).map_err(|e| {
        let inner = match e {
            base64::DecodeError::InvalidByte(off, _) | base64::DecodeError::InvalidLastSymbol(off, _) => off,
            _ => encoded.len(),
        };
        Error::ParseOffset {
            offset: field_offset + inner,
            message: format!("invalid base64 array: {e}"),
        }
    })?;
    if raw.len() % 8 != 0 {
        return Err(Error::ParseOffset {
            offset: field_offset,
            message: format!("array of {} bytes is not a whole number of f64 values", raw.len()),
        });
    }
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn json_error(bytes: &[u8], e: &serde_json::Error) -> Error {
    let (line, column) = (e.line(), e.column());
    let line_start: usize = if line <= 1 {
        0
    } else {
        bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .nth(line - 2)
            .map_or(bytes.len(), |(i, _)| i + 1)
    };
    Error::ParseOffset {
        offset: (line_start + column.saturating_sub(1)).min(bytes.len()),
        message: e.to_string(),
    }
}

/// Test-set metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    pub n_sv: usize,
    pub n_samples: usize,
    pub predict_time_ms: f64,
}

/// Accuracy (classification) or RMSE (regression) of `model` on `dataset`.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<EvalReport> {
    if dataset.task() != model.task() {
        return Err(Error::invalid(format!(
            "dataset task {} does not match model task {}",
            dataset.task(),
            model.task()
        )));
    }
    evaluate_rows(model, dataset.features(), dataset.targets())
}

/// [`evaluate`] on raw row-major features; rejects an empty test set.
pub fn evaluate_rows(model: &Model, features: &[f64], targets: &[f64]) -> Result<EvalReport> {
    if targets.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    if features.len() != targets.len() * model.n_features() {
        return Err(Error::invalid("feature buffer does not match the number of targets"));
    }
    let start = Instant::now();
    let preds = features
        .chunks_exact(model.n_features())
        .map(|x| model.predict_raw(x))
        .collect::<Result<Vec<_>>>()?;
    let predict_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let n = targets.len() as f64;
    let (accuracy, rmse) = match model.task() {
        Task::Classification => {
            let hits = preds.iter().zip(targets).filter(|(f, y)| sign(**f) == **y).count();
            (Some(hits as f64 / n), None)
        }
        Task::Regression => {
            let mse = preds.iter().zip(targets).map(|(f, y)| (f - y) * (f - y)).sum::<f64>() / n;
            (None, Some(mse.sqrt()))
        }
    };
    Ok(EvalReport {
        task: model.task(),
        accuracy,
        rmse,
        n_sv: model.n_sv(),
        n_samples: targets.len(),
        predict_time_ms,
    })
}
