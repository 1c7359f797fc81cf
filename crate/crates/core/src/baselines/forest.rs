//! Random forest of CART classification trees (Gini impurity, bootstrap
//! resampling, a random feature subset per split).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (dim as f64).sqrt().floor() as usize,
            MaxFeatures::All => dim,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        /// Fraction of class 1 among the (resampled) rows in the leaf.
        p1: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartTree {
    nodes: Vec<Node>,
}

fn gini(n1: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = n1 as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl CartTree {
    /// Grows one tree on `rows` (which may contain duplicates).
    pub fn fit<R: Rng>(
        x: ArrayView2<f64>,
        y: &[u8],
        rows: Vec<usize>,
        config: &RandomForestConfig,
        rng: &mut R,
    ) -> Self {
        let mut tree = CartTree { nodes: Vec::new() };
        let mtry = config.max_features.resolve(x.ncols());
        tree.grow(x, y, rows, 0, mtry, config, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng>(
        &mut self,
        x: ArrayView2<f64>,
        y: &[u8],
        rows: Vec<usize>,
        depth: usize,
        mtry: usize,
        config: &RandomForestConfig,
        rng: &mut R,
    ) -> usize {
        let n = rows.len();
        let n1 = rows.iter().filter(|&&r| y[r] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            p1: if n == 0 { 0.0 } else { n1 as f64 / n as f64 },
        });
        let pure = n1 == 0 || n1 == n;
        let deep = config.max_depth.is_some_and(|d| depth >= d);
        if pure || deep || n < config.min_samples_split.max(2) {
            return id;
        }
        let Some(best) = best_split(x, y, &rows, mtry, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| x[[i, best.feature]] <= best.threshold);
        let left = self.grow(x, y, l, depth + 1, mtry, config, rng);
        let right = self.grow(x, y, r, depth + 1, mtry, config, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    pub fn predict_one(&self, x: ArrayView1<f64>) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { p1 } => return *p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Features are visited in a random order until `mtry` non-constant ones have
/// been examined. Among those the lowest weighted child impurity wins; ties go
/// to the lower feature index, then the lower threshold.
fn best_split<R: Rng>(
    x: ArrayView2<f64>,
    y: &[u8],
    rows: &[usize],
    mtry: usize,
    rng: &mut R,
) -> Option<SplitChoice> {
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    order.shuffle(rng);
    let n = rows.len();
    let n1_total = rows.iter().filter(|&&r| y[r] == 1).count();
    let mut best: Option<SplitChoice> = None;
    let mut visited = 0;
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(n);
    for f in order {
        if visited == mtry {
            break;
        }
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (x[[r, f]], y[r])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[n - 1].0 {
            continue;
        }
        visited += 1;
        let mut left1 = 0usize;
        for i in 0..n - 1 {
            left1 += sorted[i].1 as usize;
            if sorted[i].0 == sorted[i + 1].0 {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let imp =
                (nl as f64 * gini(left1, nl) + nr as f64 * gini(n1_total - left1, nr)) / n as f64;
            let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
            let better = match best {
                None => true,
                Some(b) => {
                    imp < b.impurity
                        || (imp == b.impurity
                            && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    impurity: imp,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    trees: Vec<CartTree>,
    dim: usize,
}

impl RandomForestModel {
    /// `labels` must be 0 (normal) or 1 (outlier) and contain both classes.
    pub fn fit(x: ArrayView2<f64>, labels: &[u8], config: &RandomForestConfig) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        if config.n_trees == 0 {
            return Err(Error::Config(
                "a random forest needs at least one tree".into(),
            ));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Config("random forest labels must be 0 or 1".into()));
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        if n1 == 0 || n1 == labels.len() {
            return Err(Error::Stratification(
                "training labels contain a single class".into(),
            ));
        }
        let n = x.nrows();
        let trees = par::map_indexed(config.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            CartTree::fit(x, labels, rows, config, &mut rng)
        });
        Ok(Self {
            trees,
            dim: x.ncols(),
        })
    }

    pub fn trees(&self) -> &[CartTree] {
        &self.trees
    }

    /// Probability of class 1 for every row.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: x.ncols(),
            });
        }
        let k = self.trees.len() as f64;
        Ok(Array1::from(par::map_indexed(x.nrows(), |i| {
            self.trees
                .iter()
                .map(|t| t.predict_one(x.row(i)))
                .sum::<f64>()
                / k
        })))
    }

    /// Two-column class probabilities `[P(0), P(1)]`.
    pub fn class_probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let p1 = self.predict_proba(x)?;
        Ok(Array2::from_shape_fn((p1.len(), 2), |(i, c)| {
            if c == 1 {
                p1[i]
            } else {
                1.0 - p1[i]
            }
        }))
    }
}
