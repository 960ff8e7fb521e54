//! Output plumbing and table formatting.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Writes `content` to `path` when given; returns the text to print.
pub fn emit(path: Option<&Path>, content: String, what: &str) -> Result<String, CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, &content).map_err(|e| CliError::io(p, e))?;
            Ok(format!("{what} written to {}\n", p.display()))
        }
        None => Ok(content),
    }
}

/// Mean and sample standard deviation, printed as `mean(std)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}({:.2})", self.mean, self.std)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Joins rows of already-formatted cells into CSV text.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
