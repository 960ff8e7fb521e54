use serde::{Deserialize, Serialize};

use super::Dataset;

/// Per-attribute training ranges used to map features into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationSpec {
    pub fn fit(dataset: &Dataset) -> Self {
        let l = dataset.n_features();
        let mut min = vec![f64::INFINITY; l];
        let mut max = vec![f64::NEG_INFINITY; l];
        for row in dataset.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        NormalizationSpec { min, max }
    }

    /// `2(x − min)/(max − min) − 1`, or 0 for a constant attribute. Values
    /// outside the training range are not clamped.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi > lo {
            2.0 * (x - lo) / (hi - lo) - 1.0
        } else {
            0.0
        }
    }

    /// Applies the map to every row of `dataset`. Widths must agree.
    pub fn apply(&self, dataset: &Dataset) -> crate::Result<Dataset> {
        if dataset.n_features() != self.min.len() {
            return Err(crate::Error::invalid(format!(
                "normalization spec has {} attributes, dataset has {}",
                self.min.len(),
                dataset.n_features()
            )));
        }
        let l = dataset.n_features();
        let features = dataset
            .features()
            .iter()
            .enumerate()
            .map(|(k, &x)| self.transform_value(k % l, x))
            .collect();
        let mut out = Dataset::new(features, l, dataset.targets().to_vec(), dataset.task())?;
        out.meta = dataset.meta.clone();
        Ok(out)
    }
}

/// Min-max normalization of every attribute into `[-1, 1]`; the returned
/// spec carries the training statistics for transforming held-out data.
pub fn normalize_minmax(dataset: &Dataset) -> (Dataset, NormalizationSpec) {
    let spec = NormalizationSpec::fit(dataset);
    let out = spec.apply(dataset).expect("spec fitted on the same dataset");
    (out, spec)
}
