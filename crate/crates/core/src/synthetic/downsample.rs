use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownsampleSpec {
    pub target_nu: f64,
    pub seed: u64,
    pub min_outliers: usize,
}

impl Default for DownsampleSpec {
    fn default() -> Self {
        Self {
            target_nu: 0.5,
            seed: 0,
            min_outliers: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Downsampled {
    pub dataset: Dataset,
    pub achieved_nu: f64,
    pub outliers_removed: usize,
    /// Fewer than `min_outliers` outliers remain.
    pub below_minimum: bool,
}

/// Largest outlier count `k` with `k / (normals + k) ≤ ν`.
pub fn outliers_for_nu(normals: usize, nu: f64) -> usize {
    // The small slack keeps exact ratios such as ν = 0.5 from rounding down.
    (nu * normals as f64 / (1.0 - nu) + 1e-9).floor() as usize
}

/// Removes uniformly chosen outliers until the anomaly fraction drops to the
/// target. Normals are never touched and the row order is kept.
pub fn nu_downsample(dataset: &Dataset, spec: &DownsampleSpec) -> Result<Downsampled> {
    if !(spec.target_nu > 0.0 && spec.target_nu < 1.0) {
        return Err(Error::Config(format!(
            "target nu must lie in (0, 1), got {}",
            spec.target_nu
        )));
    }
    let outliers = dataset.indices_with_label(1);
    if outliers.is_empty() {
        return Err(Error::Empty("downsampling needs labelled outliers".into()));
    }
    let keep = outliers_for_nu(dataset.n_normals(), spec.target_nu);
    let result = if keep >= outliers.len() {
        if keep > outliers.len() {
            log::warn!(
                "anomaly fraction {:.4} is already below the target {}; dataset left unchanged",
                dataset.anomaly_fraction(),
                spec.target_nu
            );
        }
        dataset.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut dropped = vec![false; dataset.len()];
        let mut keep_mask = vec![false; outliers.len()];
        for i in sample(&mut rng, outliers.len(), keep) {
            keep_mask[i] = true;
        }
        for (j, &row) in outliers.iter().enumerate() {
            dropped[row] = !keep_mask[j];
        }
        let rows: Vec<usize> = (0..dataset.len()).filter(|&r| !dropped[r]).collect();
        dataset.select(&rows)
    };
    let remaining = result.n_outliers();
    Ok(Downsampled {
        achieved_nu: result.anomaly_fraction(),
        outliers_removed: outliers.len() - remaining,
        below_minimum: remaining < spec.min_outliers,
        dataset: result,
    })
}

/// One line of a synthetic sweep: the raw data behind the trend plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub outliers: Option<usize>,
    pub nu: Option<f64>,
    pub repetition: usize,
    pub method: String,
    pub auc: f64,
    pub chosen_side: Option<String>,
    pub mistakes: Option<usize>,
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("sweep csv", e))?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
