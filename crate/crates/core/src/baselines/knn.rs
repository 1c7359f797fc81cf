use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::par;

/// Distance to the k-th nearest training point as an outlier score.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Array2<f64>,
    k: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn fit(train: ArrayView2<f64>, k: usize) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::Empty("kNN needs at least one training row".into()));
        }
        if k == 0 || k > train.nrows() {
            return Err(Error::Config(format!(
                "k must lie in 1..={}, got {k}",
                train.nrows()
            )));
        }
        Ok(Self {
            train: train.to_owned(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn score_one(&self, query: ArrayView1<f64>) -> Result<f64> {
        if query.len() != self.train.ncols() {
            return Err(Error::Dimension {
                expected: self.train.ncols(),
                found: query.len(),
            });
        }
        let mut d: Vec<f64> = self
            .train
            .axis_iter(Axis(0))
            .map(|row| sq_dist(row, query))
            .collect();
        let (_, kth, _) = d.select_nth_unstable_by(self.k - 1, f64::total_cmp);
        Ok(kth.sqrt())
    }

    /// Scores every row; higher is more anomalous.
    pub fn score(&self, queries: ArrayView2<f64>) -> Result<Array1<f64>> {
        if queries.ncols() != self.train.ncols() {
            return Err(Error::Dimension {
                expected: self.train.ncols(),
                found: queries.ncols(),
            });
        }
        let scores = par::map_indexed(queries.nrows(), |i| {
            self.score_one(queries.row(i)).expect("width checked")
        });
        Ok(Array1::from(scores))
    }
}
