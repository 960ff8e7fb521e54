use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, Task};
use crate::error::Result;

/// Offset of each class mean along `(1, 1)`: with unit isotropic noise the
/// Bayes-optimal linear boundary `x₁ + x₂ = 0` is correct with probability
/// `Φ(√2 · 0.9062) ≈ 0.90`.
pub const SYNTHETIC_MEAN_SCALE: f64 = 0.906_194;

/// Depth of the wrong-labeled points inside the opposite class, in units of
/// the class mean offset.
const OUTLIER_DEPTH: f64 = 2.5;
/// Offset of the wrong-labeled points along the boundary direction `(1, -1)`.
const OUTLIER_SHIFT: f64 = 1.5;
const OUTLIER_JITTER: f64 = 0.25;

/// Two overlapping 2-D Gaussian blobs with labels `±1` and means
/// `±μ·(1, 1)`, plus `n_outliers` wrong-labeled training points appended at
/// the end of the training set, deep inside the opposite class.
///
/// The clean training rows and the test set are drawn before the outliers, so
/// runs that differ only in `n_outliers` share them exactly.
pub fn make_synthetic_linear(
    n_train: usize,
    n_test: usize,
    n_outliers: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blob = |n: usize, rng: &mut ChaCha8Rng| {
        let mut features = Vec::with_capacity(2 * n);
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            for _ in 0..2 {
                let z: f64 = StandardNormal.sample(rng);
                features.push(y * SYNTHETIC_MEAN_SCALE + z);
            }
            targets.push(y);
        }
        (features, targets)
    };
    let (mut train_x, mut train_y) = blob(n_train, &mut rng);
    let (test_x, test_y) = blob(n_test, &mut rng);

    let jitter = Normal::new(0.0, OUTLIER_JITTER).expect("valid jitter");
    let depth = OUTLIER_DEPTH * SYNTHETIC_MEAN_SCALE;
    let shift = OUTLIER_SHIFT / std::f64::consts::SQRT_2;
    for k in 0..n_outliers {
        // Sits in the class `region`, carries the opposite label. Alternate
        // outliers are point reflections of each other, so together they
        // rotate a least-squares boundary instead of cancelling out.
        let region = if k % 2 == 0 { 1.0 } else { -1.0 };
        train_x.push(region * (depth + shift) + jitter.sample(&mut rng));
        train_x.push(region * (depth - shift) + jitter.sample(&mut rng));
        train_y.push(-region);
    }

    let train = Dataset::new(train_x, 2, train_y, Task::Classification)?.with_meta("synthetic-linear", Some(seed));
    let test = Dataset::new(test_x, 2, test_y, Task::Classification)?.with_meta("synthetic-linear", Some(seed));
    Ok((train, test))
}

/// Smooth regression target on `[-1, 1]^l`:
/// `y = 2 + Σ_j sin(π x_j)/√l + 0.1·ε`. Positive mean, so the target-noise
/// protocol has a nonzero scale.
pub fn make_synthetic_regression(m: usize, l: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(m * l);
    let mut targets = Vec::with_capacity(m);
    let scale = 1.0 / (l.max(1) as f64).sqrt();
    for _ in 0..m {
        let mut y = 2.0;
        for _ in 0..l {
            let x: f64 = rng.random_range(-1.0..=1.0);
            y += scale * (std::f64::consts::PI * x).sin();
            features.push(x);
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        targets.push(y + 0.1 * eps);
    }
    Ok(Dataset::new(features, l, targets, Task::Regression)?.with_meta("synthetic-regression", Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            make_synthetic_linear(60, 100, 4, 3).unwrap(),
            make_synthetic_linear(60, 100, 4, 3).unwrap()
        );
        assert_ne!(
            make_synthetic_linear(60, 100, 4, 3).unwrap().0,
            make_synthetic_linear(60, 100, 4, 4).unwrap().0
        );
        assert_eq!(
            make_synthetic_regression(50, 3, 1).unwrap(),
            make_synthetic_regression(50, 3, 1).unwrap()
        );
    }

    #[test]
    fn outliers_are_appended_and_mislabeled() {
        let (clean, test_a) = make_synthetic_linear(60, 100, 0, 5).unwrap();
        let (dirty, test_b) = make_synthetic_linear(60, 100, 4, 5).unwrap();
        assert_eq!(clean.len(), 60);
        assert_eq!(dirty.len(), 64);
        assert_eq!(test_a, test_b);
        assert_eq!(&dirty.features()[..120], clean.features());
        for i in 60..64 {
            let x = dirty.row(i);
            // Deep on the side opposite to its label.
            assert!(dirty.targets()[i] * (x[0] + x[1]) < -2.0);
        }
    }

    #[test]
    fn clean_labels_follow_generating_blob() {
        let (d, _) = make_synthetic_linear(10, 1, 0, 0).unwrap();
        for (i, &y) in d.targets().iter().enumerate() {
            assert_eq!(y, if i % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
}
