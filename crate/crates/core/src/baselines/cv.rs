use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{RandomForestConfig, RandomForestModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvFolds {
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for CvFolds {
    fn default() -> Self {
        Self {
            n_folds: 5,
            seed: 0,
        }
    }
}

impl CvFolds {
    /// Fold id for every sample. Each class is shuffled and dealt round-robin,
    /// so fold sizes per class differ by at most one.
    pub fn assign(&self, labels: &[u8]) -> Result<Vec<usize>> {
        if self.n_folds < 2 {
            return Err(Error::Config(
                "cross-validation needs at least two folds".into(),
            ));
        }
        if labels.len() < self.n_folds {
            return Err(Error::Stratification(format!(
                "{} samples cannot fill {} folds",
                labels.len(),
                self.n_folds
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut fold = vec![0; labels.len()];
        let mut offset = 0;
        for class in [0u8, 1u8] {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            idx.shuffle(&mut rng);
            for (j, &i) in idx.iter().enumerate() {
                fold[i] = (offset + j) % self.n_folds;
            }
            // Continue dealing where the previous class stopped so total
            // fold sizes stay balanced as well.
            offset = (offset + idx.len()) % self.n_folds;
        }
        Ok(fold)
    }
}

/// Out-of-fold outlier probabilities from a random forest. Every sample is
/// scored by a forest that never saw it.
pub fn rf_fit_predict_cv(
    x: ArrayView2<f64>,
    labels: &[u8],
    folds: &CvFolds,
    config: &RandomForestConfig,
) -> Result<Array1<f64>> {
    if x.nrows() != labels.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    let fold = folds.assign(labels)?;
    let mut out = Array1::<f64>::zeros(labels.len());
    for k in 0..folds.n_folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| fold[i] == k);
        let train_y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let ones = train_y.iter().filter(|&&l| l == 1).count();
        if ones == 0 || ones == train_y.len() {
            return Err(Error::Stratification(format!(
                "training part of fold {k} holds a single class"
            )));
        }
        let cfg = RandomForestConfig {
            seed: config.seed.wrapping_add(k as u64),
            ..*config
        };
        let model = RandomForestModel::fit(x.select(Axis(0), &train).view(), &train_y, &cfg)?;
        let p = model.predict_proba(x.select(Axis(0), &test).view())?;
        for (&i, &v) in test.iter().zip(p.iter()) {
            out[i] = v;
        }
    }
    Ok(out)
}
