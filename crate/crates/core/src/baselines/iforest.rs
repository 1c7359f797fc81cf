//! Isolation forest.
//!
//! Each tree isolates a random subsample by recursive axis-aligned splits at a
//! uniformly drawn threshold. Anomalies are isolated after fewer splits, so the
//! score `2^(−E[h(x)] / c(ψ))` is close to 1 for them and well below ½ for
//! points inside dense regions.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful binary-search-tree lookup among `n`
/// points, used both as the score normaliser and for truncated leaves.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestConfig {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One isolation tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn build<R: Rng>(
        data: ArrayView2<f64>,
        rows: Vec<usize>,
        height_limit: usize,
        rng: &mut R,
    ) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow(data, rows, 0, height_limit, rng);
        tree
    }

    fn grow<R: Rng>(
        &mut self,
        data: ArrayView2<f64>,
        rows: Vec<usize>,
        depth: usize,
        limit: usize,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= limit || rows.len() <= 1 {
            return id;
        }
        // Features that still vary inside this node.
        let ranges: Vec<(usize, f64, f64)> = (0..data.ncols())
            .filter_map(|f| {
                let (lo, hi) =
                    rows.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                            let v = data[[r, f]];
                            (lo.min(v), hi.max(v))
                        });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let threshold = Uniform::new(lo, hi).expect("lo < hi").sample(rng);
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| data[[r, feature]] < threshold);
        let left = self.grow(data, l_rows, depth + 1, limit, rng);
        let right = self.grow(data, r_rows, depth + 1, limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Edges from the root to the leaf reached by `x`, plus `c(leaf size)`.
    pub fn path_length(&self, x: ArrayView1<f64>) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                    depth += 1;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { size } => Some(*size),
                Node::Split { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel {
    trees: Vec<IsolationTree>,
    subsample: usize,
    height_limit: usize,
    dim: usize,
}

impl IsolationForestModel {
    pub fn fit(train: ArrayView2<f64>, config: &IsolationForestConfig) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::Config(
                "an isolation forest needs at least one tree".into(),
            ));
        }
        let n = train.nrows();
        let psi = config.subsample.min(n);
        if psi < 2 {
            return Err(Error::Empty(
                "isolation forest needs at least two training rows".into(),
            ));
        }
        let height_limit = (psi as f64).log2().ceil() as usize;
        let trees = par::map_indexed(config.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let rows = sample(&mut rng, n, psi).into_vec();
            IsolationTree::build(train, rows, height_limit, &mut rng)
        });
        Ok(Self {
            trees,
            subsample: psi,
            height_limit,
            dim: train.ncols(),
        })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn mean_path_length(&self, x: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score_one(&self, x: ArrayView1<f64>) -> f64 {
        2f64.powf(-self.mean_path_length(x) / average_path_length(self.subsample))
    }

    pub fn score(&self, queries: ArrayView2<f64>) -> Result<Array1<f64>> {
        if queries.ncols() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: queries.ncols(),
            });
        }
        Ok(Array1::from(par::map_indexed(queries.nrows(), |i| {
            self.score_one(queries.row(i))
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand_distr::StandardNormal;

    #[test]
    fn average_path_length_values() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2 (ln 255 + γ) − 2·255/256
        let c256 = 2.0 * (255f64.ln() + EULER_GAMMA) - 2.0 * 255.0 / 256.0;
        assert!((average_path_length(256) - c256).abs() < 1e-12);
        assert!(average_path_length(256) > 0.0);
    }

    #[test]
    fn two_point_tree_by_hand() {
        // ψ = 2, height limit 1: the root separates the points, each leaf holds
        // one point, so every query has h = 1 and the score is 2^(−1/c(2)) = ½.
        let x = array![[0.0, 0.0], [1.0, 2.0]];
        let cfg = IsolationForestConfig {
            n_trees: 1,
            subsample: 2,
            seed: 3,
        };
        let m = IsolationForestModel::fit(x.view(), &cfg).unwrap();
        assert_eq!(m.height_limit(), 1);
        let tree = &m.trees()[0];
        assert_eq!(tree.leaf_sizes(), vec![1, 1]);
        for q in [array![0.0, 0.0], array![1.0, 2.0], array![50.0, -3.0]] {
            assert_eq!(tree.path_length(q.view()), 1.0);
            assert_eq!(m.score_one(q.view()), 0.5);
        }
    }

    #[test]
    fn far_point_scores_above_the_bulk() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_simple_fn((500, 3), || rng.sample::<f64, _>(StandardNormal));
        let m = IsolationForestModel::fit(x.view(), &IsolationForestConfig::default()).unwrap();
        let centre = m.score_one(array![0.0, 0.0, 0.0].view());
        let far = m.score_one(array![8.0, -8.0, 8.0].view());
        assert!(far > centre);
        assert!(far > 0.6, "{far}");
    }

    #[test]
    fn depth_never_exceeds_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((1000, 2), || rng.sample::<f64, _>(StandardNormal));
        let m = IsolationForestModel::fit(x.view(), &IsolationForestConfig::default()).unwrap();
        assert_eq!(m.height_limit(), 8);
        for t in m.trees() {
            assert!(t.depth() <= 8);
            assert_eq!(t.leaf_sizes().iter().sum::<usize>(), 256);
        }
    }

    #[test]
    fn identical_forests_score_identically() {
        let x = Array2::from_shape_fn((100, 2), |(i, j)| ((i * 31 + j * 17) % 23) as f64);
        let a = IsolationForestModel::fit(x.view(), &IsolationForestConfig::default()).unwrap();
        let b = IsolationForestModel::fit(x.view(), &IsolationForestConfig::default()).unwrap();
        assert_eq!(a, b);
        let q = array![[3.0, 100.0]];
        assert_eq!(a.score(q.view()).unwrap(), b.score(q.view()).unwrap());
    }
}
