use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::DoustConfig;
use super::train::{pretrain, refine};
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::nn::{Network, Topology};
use crate::par::{self, Execution};

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

const PROBE_ROWS: usize = 256;

// ChaCha stream per use of a submodel seed.
const STREAM_INIT: u64 = 0;
const STREAM_BAGGING: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SubmodelStatus {
    Ok,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submodel {
    pub seed: u64,
    pub status: SubmodelStatus,
    /// Input columns this member sees; `None` means all of them.
    pub features: Option<Vec<usize>>,
    /// Present exactly when the status is ok.
    pub network: Option<Network>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Submodel {
    pub fn is_ok(&self) -> bool {
        matches!(self.status, SubmodelStatus::Ok)
    }

    fn failed(seed: u64, features: Option<Vec<usize>>, reason: String) -> Self {
        Self {
            seed,
            status: SubmodelStatus::Failed { reason },
            features,
            network: None,
            notes: Vec::new(),
        }
    }

    fn score_normalized(&self, normalized: &Array2<f64>) -> Result<Option<Array1<f64>>> {
        let Some(net) = self.network.as_ref().filter(|_| self.is_ok()) else {
            return Ok(None);
        };
        let scores = match &self.features {
            Some(cols) => net.forward(normalized.select(Axis(1), cols).view())?,
            None => net.forward(normalized.view())?,
        };
        Ok(Some(scores))
    }
}

/// `⌈fraction · input_dim⌉` distinct feature indices, sorted ascending.
pub fn feature_bag_mask(input_dim: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((fraction * input_dim as f64).ceil() as usize).clamp(1, input_dim.max(1));
    if k >= input_dim {
        return (0..input_dim).collect();
    }
    let mut rng = seeded_stream(seed, STREAM_BAGGING);
    let mut idx = rand::seq::index::sample(&mut rng, input_dim, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Averaged scores of the surviving members of a DOUST ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleFile", into = "EnsembleFile")]
pub struct EnsembleModel {
    submodels: Vec<Submodel>,
    normalizer: Standardizer,
    config: DoustConfig,
}

impl EnsembleModel {
    /// Assembles an ensemble from already trained members.
    pub fn from_parts(
        submodels: Vec<Submodel>,
        normalizer: Standardizer,
        config: DoustConfig,
    ) -> Result<Self> {
        for m in &submodels {
            if m.is_ok() && m.network.is_none() {
                return Err(Error::Schema(format!(
                    "submodel with seed {} is ok but has no network",
                    m.seed
                )));
            }
        }
        if !submodels.iter().any(Submodel::is_ok) {
            let first_reason = submodels
                .iter()
                .find_map(|m| match &m.status {
                    SubmodelStatus::Failed { reason } => Some(reason.clone()),
                    SubmodelStatus::Ok => None,
                })
                .unwrap_or_else(|| "no submodels".into());
            return Err(Error::AllSubmodelsFailed {
                attempted: submodels.len(),
                first_reason,
            });
        }
        Ok(Self {
            submodels,
            normalizer,
            config,
        })
    }

    pub fn submodels(&self) -> &[Submodel] {
        &self.submodels
    }

    pub fn config(&self) -> &DoustConfig {
        &self.config
    }

    pub fn normalizer(&self) -> &Standardizer {
        &self.normalizer
    }

    pub fn ok_count(&self) -> usize {
        self.submodels.iter().filter(|m| m.is_ok()).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.submodels
            .iter()
            .enumerate()
            .filter_map(|(i, m)| match &m.status {
                SubmodelStatus::Failed { reason } => Some((i, reason.as_str())),
                SubmodelStatus::Ok => None,
            })
    }

    /// Mean score of the ok members, summed in index order; higher is more anomalous.
    pub fn score(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        let normalized = self.normalizer.transform(features)?;
        let mut total = Array1::zeros(features.nrows());
        let mut used = 0usize;
        for m in &self.submodels {
            if let Some(s) = m.score_normalized(&normalized)? {
                total += &s;
                used += 1;
            }
        }
        Ok(total / used as f64)
    }

    /// Drops members by index. Removing every ok member is an error.
    pub fn without(&self, drop: &[usize]) -> Result<Self> {
        let submodels = self
            .submodels
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, m)| m.clone())
            .collect();
        Self::from_parts(submodels, self.normalizer.clone(), self.config.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Trains `config.ensemble_size` submodels; member `i` uses seed `config.seed + i`.
///
/// `train` holds normal rows only and `test` is unlabeled. Failed members are
/// recorded and excluded from scoring; the call fails only if every member fails.
pub fn train_ensemble(
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
    config: &DoustConfig,
) -> Result<EnsembleModel> {
    train_ensemble_in(Execution::default(), train, test, config, &[])
}

/// [`train_ensemble`] with the weights of the listed members overwritten by NaN
/// after pretraining, so that they fail through the ordinary divergence checks.
pub fn train_ensemble_with_faults(
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
    config: &DoustConfig,
    poisoned: &[usize],
) -> Result<EnsembleModel> {
    train_ensemble_in(Execution::default(), train, test, config, poisoned)
}

pub fn train_ensemble_in(
    exec: Execution,
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
    config: &DoustConfig,
    poisoned: &[usize],
) -> Result<EnsembleModel> {
    config.validate()?;
    if train.ncols() != test.ncols() {
        return Err(Error::Dimension {
            expected: train.ncols(),
            found: test.ncols(),
        });
    }
    let normalizer = Standardizer::fit(train)?;
    let train_n = normalizer.transform(train)?;
    let test_n = normalizer.transform(test)?;
    let dim = train.ncols();

    let submodels = par::map_indexed_in(exec, config.ensemble_size, |i| {
        let seed = config.seed.wrapping_add(i as u64);
        train_submodel(&train_n, &test_n, dim, seed, config, poisoned.contains(&i))
    });
    for (i, m) in submodels.iter().enumerate() {
        if let SubmodelStatus::Failed { reason } = &m.status {
            log::warn!("submodel {i} (seed {}) failed: {reason}", m.seed);
        }
    }
    EnsembleModel::from_parts(submodels, normalizer, config.clone())
}

fn train_submodel(
    train: &Array2<f64>,
    test: &Array2<f64>,
    dim: usize,
    seed: u64,
    config: &DoustConfig,
    poison: bool,
) -> Submodel {
    let features = (config.feature_fraction < 1.0)
        .then(|| feature_bag_mask(dim, config.feature_fraction, seed));
    let (train_v, test_v) = match &features {
        Some(cols) => (train.select(Axis(1), cols), test.select(Axis(1), cols)),
        None => (train.clone(), test.clone()),
    };
    let topology = Topology::new(train_v.ncols(), config.hidden.clone());
    let mut net = match Network::init_with_rng(&topology, &mut seeded_stream(seed, STREAM_INIT)) {
        Ok(net) => net,
        Err(e) => return Submodel::failed(seed, features, e.to_string()),
    };
    let mut rng = seeded_stream(seed, STREAM_SHUFFLE);
    let mut notes = Vec::new();

    match pretrain(&mut net, train_v.view(), config, &mut rng) {
        Ok(report) => {
            if config.pretrain_epochs > 0 && !report.improved() {
                notes.push(format!(
                    "pretraining did not reduce the loss ({} -> {})",
                    report.loss_before, report.loss_after
                ));
            }
        }
        Err(e) => return Submodel::failed(seed, features, e.to_string()),
    }
    if poison {
        for layer in net.layers_mut() {
            layer.weights_mut().fill(f64::NAN);
        }
    }
    if let Err(e) = refine(&mut net, train_v.view(), test_v.view(), config, &mut rng) {
        return Submodel::failed(seed, features, e.to_string());
    }
    if let Err(reason) = probe(&net, &train_v, &test_v) {
        return Submodel::failed(seed, features, reason);
    }
    Submodel {
        seed,
        status: SubmodelStatus::Ok,
        features,
        network: Some(net),
        notes,
    }
}

fn probe(
    net: &Network,
    train: &Array2<f64>,
    test: &Array2<f64>,
) -> std::result::Result<(), String> {
    if !net.is_finite() {
        return Err("non-finite weights after training".into());
    }
    for (name, x) in [("train", train), ("test", test)] {
        let rows = x.nrows().min(PROBE_ROWS);
        let s = net
            .forward(x.slice(s![..rows, ..]))
            .map_err(|e| e.to_string())?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite probe score on {name} rows"));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format_version: u32,
    config: DoustConfig,
    normalizer: Standardizer,
    submodels: Vec<Submodel>,
}

impl From<EnsembleModel> for EnsembleFile {
    fn from(m: EnsembleModel) -> Self {
        EnsembleFile {
            format_version: ENSEMBLE_FORMAT_VERSION,
            config: m.config,
            normalizer: m.normalizer,
            submodels: m.submodels,
        }
    }
}

impl TryFrom<EnsembleFile> for EnsembleModel {
    type Error = Error;

    fn try_from(f: EnsembleFile) -> Result<Self> {
        if f.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: ENSEMBLE_FORMAT_VERSION,
                found: f.format_version,
            });
        }
        EnsembleModel::from_parts(f.submodels, f.normalizer, f.config)
    }
}
