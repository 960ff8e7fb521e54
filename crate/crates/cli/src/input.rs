//! Dataset sources: sparse text files or the built-in generators.

use srlssvm::data::{make_synthetic_linear, make_synthetic_regression, read_sparse_text};
use srlssvm::{Dataset, Task};

use crate::config::{Settings, SYNTHETIC};
use crate::CliError;

pub const SYNTHETIC_CLASS_TRAIN: usize = 60;
pub const SYNTHETIC_CLASS_TEST: usize = 100;
pub const SYNTHETIC_REG_TRAIN: usize = 400;
pub const SYNTHETIC_REG_TEST: usize = 200;
pub const SYNTHETIC_REG_FEATURES: usize = 4;
/// Separates the regression test stream from the training stream.
const TEST_SEED_OFFSET: u64 = 0x5EED_0000_0000;

/// Training data and an optional held-out set.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub train: Dataset,
    pub test: Option<Dataset>,
    /// Name used in reports.
    pub name: String,
}

pub fn read_dataset(source: &str, task: Task) -> Result<Dataset, CliError> {
    Ok(read_sparse_text(source, task)?)
}

/// Loads `--data` (and `--test` if given) for the configured task.
pub fn load(settings: &Settings) -> Result<Loaded, CliError> {
    let source = settings.data_arg()?;
    let seed = settings.seed;
    let (train, generated_test) = if source == SYNTHETIC {
        match settings.task {
            Task::Classification => {
                let (tr, te) = make_synthetic_linear(SYNTHETIC_CLASS_TRAIN, SYNTHETIC_CLASS_TEST, 0, seed)?;
                (tr, Some(te))
            }
            Task::Regression => {
                let tr = make_synthetic_regression(SYNTHETIC_REG_TRAIN, SYNTHETIC_REG_FEATURES, seed)?;
                let te = make_synthetic_regression(
                    SYNTHETIC_REG_TEST,
                    SYNTHETIC_REG_FEATURES,
                    seed.wrapping_add(TEST_SEED_OFFSET),
                )?;
                (tr, Some(te))
            }
        }
    } else {
        (read_dataset(source, settings.task)?, None)
    };
    let test = match &settings.test {
        Some(path) => Some(read_dataset(path, settings.task)?),
        None => generated_test,
    };
    if let Some(te) = &test {
        if te.n_features() > train.n_features() {
            return Err(CliError::Core(srlssvm::Error::InvalidInput(format!(
                "test set has {} features, training set {}",
                te.n_features(),
                train.n_features()
            ))));
        }
    }
    let test = test.map(|te| pad_features(te, train.n_features())).transpose()?;
    Ok(Loaded {
        train,
        test,
        name: source.to_string(),
    })
}

/// Widens a sparse-text dataset whose trailing attributes were all zero.
pub fn pad_features(ds: Dataset, width: usize) -> Result<Dataset, CliError> {
    let l = ds.n_features();
    if l == width {
        return Ok(ds);
    }
    let mut features = Vec::with_capacity(ds.len() * width);
    for row in ds.rows() {
        features.extend_from_slice(row);
        features.extend(std::iter::repeat_n(0.0, width - l));
    }
    let mut out = Dataset::new(features, width, ds.targets().to_vec(), ds.task())?;
    out.meta = ds.meta.clone();
    Ok(out)
}
