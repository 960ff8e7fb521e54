use std::path::Path;

use super::{Dataset, Task};
use crate::error::{Error, Result};

/// Reads a sparse text file (`label idx:val idx:val ...`, 1-based indices).
pub fn read_sparse_text(path: impl AsRef<Path>, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut ds = parse_sparse_text(&bytes, task)?;
    ds.meta.source = path.display().to_string();
    Ok(ds)
}

/// Parses the sparse text format.
///
/// Omitted entries are zero and the width is the largest index seen. Blank
/// lines and `#` comments are ignored. In classification mode exactly two
/// distinct raw labels are required; the larger maps to `+1`.
pub fn parse_sparse_text(input: &[u8], task: Task) -> Result<Dataset> {
    let text = std::str::from_utf8(input).map_err(|e| {
        let line = input[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::ParseLine {
            line,
            message: "input is not valid UTF-8".into(),
        }
    })?;

    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::ParseLine { line: line_no, message };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("label {label_tok:?} is not a number")))?;
        if !label.is_finite() {
            return Err(err(format!("label {label_tok:?} is not finite")));
        }

        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("token {tok:?} is not of the form idx:val")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| err(format!("index {idx_s:?} is not a positive integer")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based; found 0".into()));
            }
            if idx <= last {
                return Err(err(format!(
                    "feature index {idx} does not follow {last} in ascending order"
                )));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| err(format!("value {val_s:?} is not a number")))?;
            if !val.is_finite() {
                return Err(err(format!("value {val_s:?} is not finite")));
            }
            last = idx;
            entries.push((idx, val));
        }
        width = width.max(last);
        labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::invalid("sparse text input contains no samples"));
    }
    // All-sparse rows with no features at all still need one column.
    let width = width.max(1);

    let targets = match task {
        Task::Regression => labels,
        Task::Classification => {
            let mut distinct: Vec<f64> = labels.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() != 2 {
                return Err(Error::invalid(format!(
                    "classification requires exactly two distinct labels, found {}",
                    distinct.len()
                )));
            }
            let hi = distinct[1];
            labels.iter().map(|&v| if v == hi { 1.0 } else { -1.0 }).collect()
        }
    };

    let mut features = vec![0.0; rows.len() * width];
    for (i, entries) in rows.iter().enumerate() {
        for &(idx, val) in entries {
            features[i * width + idx - 1] = val;
        }
    }
    Dataset::new(features, width, targets, task)
}
