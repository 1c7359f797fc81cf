use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::synthetic::{nu_downsample, outliers_for_nu, DownsampleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Target anomaly fraction of the test set.
    pub nu: f64,
    /// Share of the normals used for training.
    pub train_fraction: f64,
    /// Assumed training contamination; informational only.
    pub contamination: f64,
    pub seed: u64,
    pub min_outliers: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            nu: 0.5,
            train_fraction: 0.5,
            contamination: 0.0,
            seed: 0,
            min_outliers: 200,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.contamination) {
            return Err(Error::Config(format!(
                "contamination must lie in [0, 1), got {}",
                self.contamination
            )));
        }
        Ok(())
    }
}

/// Normal-only training features and a labelled mixed test set. The training
/// half carries no labels at all.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSplit {
    pub train: Array2<f64>,
    pub test: Array2<f64>,
    pub test_labels: Vec<u8>,
    pub achieved_nu: f64,
    pub normals_removed: usize,
    pub outliers_removed: usize,
    pub below_min_outliers: bool,
    /// Set when the target fraction cannot be met at all.
    pub unreachable: Option<String>,
}

impl OneClassSplit {
    pub fn test_outliers(&self) -> usize {
        self.test_labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Splits the normals into train and test, then brings the test set to the
/// target anomaly fraction: surplus outliers are dropped at random, and when
/// outliers are too scarce some test normals are dropped instead.
pub fn make_oneclass_split(dataset: &Dataset, spec: &SplitSpec) -> Result<OneClassSplit> {
    spec.validate()?;
    let mut normals = dataset.indices_with_label(0);
    let outliers = dataset.indices_with_label(1);
    if normals.len() < 2 || outliers.is_empty() {
        return Err(Error::Empty(format!(
            "a one-class split needs two normals and one outlier, got {} and {}",
            normals.len(),
            outliers.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    normals.shuffle(&mut rng);
    let n_train =
        ((spec.train_fraction * normals.len() as f64).round() as usize).clamp(1, normals.len() - 1);
    let (train_rows, test_normals) = normals.split_at(n_train);
    let mut train_rows = train_rows.to_vec();
    train_rows.sort_unstable();

    let o = outliers.len();
    let mut normals_removed = 0;
    let mut unreachable = None;
    let mut test_normals = test_normals.to_vec();
    if outliers_for_nu(test_normals.len(), spec.nu) > o {
        // Keep m normals with o / (m + o) as close to ν from above as possible.
        let m = (o as f64 * (1.0 - spec.nu) / spec.nu + 1e-9).floor() as usize;
        if m == 0 {
            unreachable = Some(format!(
                "{o} outliers cannot reach nu={} with any normal left",
                spec.nu
            ));
        } else {
            normals_removed = test_normals.len() - m;
            test_normals.truncate(m);
        }
    }
    test_normals.sort_unstable();
    let test_rows: Vec<usize> = test_normals.iter().chain(&outliers).copied().collect();
    let downsampled = nu_downsample(
        &dataset.select(&test_rows),
        &DownsampleSpec {
            target_nu: spec.nu,
            seed: spec.seed.wrapping_add(1),
            min_outliers: spec.min_outliers,
        },
    )?;
    let test = downsampled.dataset;
    Ok(OneClassSplit {
        train: dataset.features.select(Axis(0), &train_rows),
        test: test.features,
        test_labels: test.labels,
        achieved_nu: downsampled.achieved_nu,
        normals_removed,
        outliers_removed: downsampled.outliers_removed,
        below_min_outliers: downsampled.below_minimum,
        unreachable,
    })
}
