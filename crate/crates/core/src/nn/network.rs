use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{shifted_sigmoid, shifted_sigmoid_grad_from_output};
use crate::error::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Rows scored per chunk in [`Network::forward`]; bounds the activation memory.
const SCORE_CHUNK: usize = 4096;

/// Layer widths of a network. The output layer always has a single node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl Topology {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self { input_dim, hidden }
    }

    /// Three hidden layers of width 100.
    pub fn standard(input_dim: usize) -> Self {
        Self::new(input_dim, vec![100, 100, 100])
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if let Some(pos) = self.hidden.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("hidden layer {pos} has zero width")));
        }
        Ok(())
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Weight matrix of shape `(fan_in, fan_out)`. There is no bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
}

impl DenseLayer {
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("layer weights must be finite".into()));
        }
        Ok(Self { weights })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }
}

/// Rectifier hidden layers followed by one shifted-sigmoid output node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input to every layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every hidden layer.
    hidden_pre: Vec<Array2<f64>>,
    scores: Array1<f64>,
}

impl ForwardPass {
    pub fn scores(&self) -> &Array1<f64> {
        &self.scores
    }
}

/// Loss gradient with respect to every weight, one matrix per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

impl Network {
    /// Glorot-uniform initialisation: each weight of a `fan_in → fan_out` layer is
    /// drawn from `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
    pub fn init(topology: &Topology, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(topology, &mut rng)
    }

    pub fn init_with_rng<R: rand::Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Result<Self> {
        topology.validate()?;
        let layers = topology
            .shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng));
                DenseLayer { weights }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Dimension {
                    expected: pair[0].fan_out(),
                    found: pair[1].fan_in(),
                });
            }
        }
        let last = layers.last().expect("nonempty");
        if last.fan_out() != 1 {
            return Err(Error::Config(format!(
                "output layer must have one node, found {}",
                last.fan_out()
            )));
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn topology(&self) -> Topology {
        Topology {
            input_dim: self.input_dim(),
            hidden: self.layers[..self.layers.len() - 1]
                .iter()
                .map(DenseLayer::fan_out)
                .collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|w| w.is_finite()))
    }

    fn check_width(&self, features: &ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: features.ncols(),
            });
        }
        Ok(())
    }

    /// Scores every row of `features`.
    pub fn forward(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_width(&features)?;
        let mut out = Array1::zeros(features.nrows());
        let mut start = 0;
        while start < features.nrows() {
            let end = (start + SCORE_CHUNK).min(features.nrows());
            let chunk = features.slice(s![start..end, ..]);
            out.slice_mut(s![start..end])
                .assign(&self.score_chunk(chunk));
            start = end;
        }
        Ok(out)
    }

    fn score_chunk(&self, features: ArrayView2<f64>) -> Array1<f64> {
        let (last, hidden) = self.layers.split_last().expect("nonempty");
        let mut act: Option<Array2<f64>> = None;
        for layer in hidden {
            let mut z = match &act {
                None => features.dot(&layer.weights),
                Some(a) => a.dot(&layer.weights),
            };
            z.mapv_inplace(|v| v.max(0.0));
            act = Some(z);
        }
        let z = match &act {
            None => features.dot(&last.weights),
            Some(a) => a.dot(&last.weights),
        };
        z.column(0).mapv(shifted_sigmoid)
    }

    /// Forward pass that keeps the activations needed by [`Network::backward`].
    pub fn forward_cached(&self, features: ArrayView2<f64>) -> Result<ForwardPass> {
        self.check_width(&features)?;
        let (last, hidden) = self.layers.split_last().expect("nonempty");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(hidden.len());
        inputs.push(features.to_owned());
        for layer in hidden {
            let z = inputs.last().expect("nonempty").dot(&layer.weights);
            inputs.push(z.mapv(|v| v.max(0.0)));
            hidden_pre.push(z);
        }
        let z = inputs.last().expect("nonempty").dot(&last.weights);
        let scores = z.column(0).mapv(shifted_sigmoid);
        Ok(ForwardPass {
            inputs,
            hidden_pre,
            scores,
        })
    }

    /// Reverse-mode gradient of a loss whose derivative with respect to each
    /// output score is `score_grad`.
    pub fn backward(&self, pass: &ForwardPass, score_grad: &[f64]) -> Result<Gradients> {
        let n = pass.scores.len();
        if score_grad.len() != n || pass.inputs.len() != self.layers.len() {
            return Err(Error::Dimension {
                expected: n,
                found: score_grad.len(),
            });
        }
        let mut grads = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut delta = Array2::from_shape_fn((n, 1), |(i, _)| {
            let d = score_grad[i] * shifted_sigmoid_grad_from_output(pass.scores[i]);
            // Saturated outputs give vanishing deltas; keep them out of the
            // subnormal range.
            if d.abs() < 1e-100 {
                0.0
            } else {
                d
            }
        });
        for l in (0..self.layers.len()).rev() {
            grads[l] = pass.inputs[l].t().dot(&delta);
            if l == 0 {
                break;
            }
            let mut upstream = delta.dot(&self.layers[l].weights.t());
            Zip::from(&mut upstream)
                .and(&pass.hidden_pre[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = upstream;
        }
        Ok(Gradients { layers: grads })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `(fan_in, fan_out)`.
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format_version: u32,
    input_dim: usize,
    layers: Vec<LayerFile>,
}

impl From<Network> for NetworkFile {
    fn from(net: Network) -> Self {
        NetworkFile {
            format_version: NETWORK_FORMAT_VERSION,
            input_dim: net.input_dim(),
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerFile {
                    fan_in: l.fan_in(),
                    fan_out: l.fan_out(),
                    weights: l.weights.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        if file.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: NETWORK_FORMAT_VERSION,
                found: file.format_version,
            });
        }
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.fan_in, l.fan_out), l.weights)
                    .map_err(|e| Error::Schema(format!("layer weights: {e}")))?;
                DenseLayer::from_weights(w)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::from_layers(layers)?;
        if net.input_dim() != file.input_dim {
            return Err(Error::Dimension {
                expected: file.input_dim,
                found: net.input_dim(),
            });
        }
        Ok(net)
    }
}
