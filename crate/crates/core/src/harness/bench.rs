use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::load_dataset;
use super::split::{make_oneclass_split, OneClassSplit, SplitSpec};
use crate::baselines::{
    rf_fit_predict_cv, CvFolds, IsolationForestConfig, IsolationForestModel, KnnModel,
    RandomForestConfig,
};
use crate::data::Dataset;
use crate::doust::{train_ensemble_with_faults, DoustConfig};
use crate::error::{Error, Result};
use crate::metrics::{wilcoxon_holm, ScoredSet, SignificanceReport, WilcoxonOptions};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Doust,
    Knn,
    Iforest,
    RfSupervised,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Doust,
        Algorithm::Knn,
        Algorithm::Iforest,
        Algorithm::RfSupervised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Doust => "doust",
            Algorithm::Knn => "knn",
            Algorithm::Iforest => "iforest",
            Algorithm::RfSupervised => "rf_supervised",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnSettings {
    pub k: usize,
}

impl Default for KnnSettings {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkProtocol {
    pub datasets: Vec<DatasetSource>,
    pub split: SplitSpec,
    pub algorithms: Vec<Algorithm>,
    pub doust: DoustConfig,
    pub knn: KnnSettings,
    pub iforest: IsolationForestConfig,
    pub rf: RandomForestConfig,
    pub cv: CvFolds,
    pub repetitions: usize,
    pub seed: u64,
    /// Exclude test sets with fewer outliers than `split.min_outliers`
    /// instead of only warning. Always on in sweeps.
    pub enforce_min_outliers: bool,
    pub alpha: f64,
    pub wilcoxon: WilcoxonOptions,
    /// Submodel indices whose weights are poisoned during DOUST training;
    /// exists to exercise failure handling.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub doust_fault_injection: Vec<usize>,
}

impl Default for BenchmarkProtocol {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            split: SplitSpec::default(),
            algorithms: Algorithm::ALL.to_vec(),
            doust: DoustConfig::default(),
            knn: KnnSettings::default(),
            iforest: IsolationForestConfig::default(),
            rf: RandomForestConfig::default(),
            cv: CvFolds::default(),
            repetitions: 1,
            seed: 0,
            enforce_min_outliers: false,
            alpha: 0.05,
            wilcoxon: WilcoxonOptions::default(),
            doust_fault_injection: Vec::new(),
        }
    }
}

impl BenchmarkProtocol {
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.doust.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        Ok(())
    }

    /// Seed for repetition `rep`; shared by the split and every algorithm.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }

    fn algorithm_config(&self, algorithm: Algorithm) -> serde_json::Value {
        let v = match algorithm {
            Algorithm::Doust => serde_json::to_value((&self.doust, &self.doust_fault_injection)),
            Algorithm::Knn => serde_json::to_value(self.knn),
            Algorithm::Iforest => serde_json::to_value(self.iforest),
            Algorithm::RfSupervised => serde_json::to_value((self.rf, self.cv)),
        };
        v.expect("configs serialize")
    }

    fn config_hash(&self, dataset: &str, algorithm: Algorithm, split: &SplitSpec) -> String {
        let canonical = serde_json::json!({
            "dataset": dataset,
            "algorithm": algorithm,
            "config": self.algorithm_config(algorithm),
            "split": split,
            "enforce_min_outliers": self.enforce_min_outliers,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    DatasetExcluded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub nu: f64,
    pub achieved_nu: Option<f64>,
    pub repetition: usize,
    pub seed: u64,
    pub auc: Option<f64>,
    pub wall_time_s: f64,
    pub status: RunStatus,
    pub reason: Option<String>,
    pub config_hash: String,
}

pub fn write_records_jsonl<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("records", e))?;
    }
    out.flush().map_err(|e| Error::io("records", e))
}

pub fn read_records_jsonl<R: BufRead>(input: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("records", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub records: Vec<RunRecord>,
    pub algorithms: Vec<Algorithm>,
    /// Datasets where every algorithm was ok in every repetition.
    pub compared_datasets: Vec<String>,
    /// Mean AUC over repetitions, one row per compared dataset.
    pub matrix: Vec<Vec<f64>>,
    pub report: Option<SignificanceReport>,
    pub report_note: Option<String>,
}

impl BenchmarkOutcome {
    pub fn has_failures(&self) -> bool {
        self.records.iter().any(|r| r.status == RunStatus::Failed)
    }

    /// Mean AUC of the ok runs of one algorithm on one dataset.
    pub fn mean_auc(&self, dataset: &str, algorithm: Algorithm) -> Option<f64> {
        let aucs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| {
                r.dataset == dataset && r.algorithm == algorithm && r.status == RunStatus::Ok
            })
            .filter_map(|r| r.auc)
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

/// Builds a significance outcome from existing records, e.g. a JSON-lines
/// file written by an earlier run.
pub fn summarize_records(
    records: Vec<RunRecord>,
    alpha: f64,
    wilcoxon: WilcoxonOptions,
) -> BenchmarkOutcome {
    let mut algorithms: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    let mut by_dataset: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in &records {
        if !by_dataset.contains_key(r.dataset.as_str()) {
            order.push(&r.dataset);
        }
        by_dataset.entry(&r.dataset).or_default().push(r);
    }
    let mut compared = Vec::new();
    let mut matrix = Vec::new();
    for id in order {
        let runs = &by_dataset[id];
        let all_ok = runs
            .iter()
            .all(|r| r.status == RunStatus::Ok && r.auc.is_some());
        let covered = algorithms
            .iter()
            .all(|a| runs.iter().any(|r| r.algorithm == *a));
        if !(all_ok && covered) {
            continue;
        }
        let row = algorithms
            .iter()
            .map(|a| {
                let v: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.algorithm == *a)
                    .filter_map(|r| r.auc)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        compared.push(id.to_string());
        matrix.push(row);
    }
    let names: Vec<String> = algorithms.iter().map(|a| a.name().to_string()).collect();
    let (report, report_note) = match wilcoxon_holm(&matrix, &names, alpha, wilcoxon) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    BenchmarkOutcome {
        records,
        algorithms,
        compared_datasets: compared,
        matrix,
        report,
        report_note,
    }
}

fn score_algorithm(
    protocol: &BenchmarkProtocol,
    algorithm: Algorithm,
    split: &OneClassSplit,
    seed: u64,
) -> Result<Vec<f64>> {
    let train = split.train.view();
    let test = split.test.view();
    let scores = match algorithm {
        Algorithm::Doust => {
            let config = DoustConfig {
                seed: protocol.doust.seed.wrapping_add(seed),
                ..protocol.doust.clone()
            };
            let model =
                train_ensemble_with_faults(train, test, &config, &protocol.doust_fault_injection)?;
            model.score(test)?
        }
        Algorithm::Knn => KnnModel::fit(train, protocol.knn.k)?.score(test)?,
        Algorithm::Iforest => {
            let cfg = IsolationForestConfig {
                seed: protocol.iforest.seed.wrapping_add(seed),
                ..protocol.iforest
            };
            IsolationForestModel::fit(train, &cfg)?.score(test)?
        }
        // The only place labels reach a model: folds over the test set.
        Algorithm::RfSupervised => {
            let rf = RandomForestConfig {
                seed: protocol.rf.seed.wrapping_add(seed),
                ..protocol.rf
            };
            let cv = CvFolds {
                seed: protocol.cv.seed.wrapping_add(seed),
                ..protocol.cv
            };
            rf_fit_predict_cv(test, &split.test_labels, &cv, &rf)?
        }
    };
    Ok(scores.to_vec())
}

fn run_one_repetition(
    protocol: &BenchmarkProtocol,
    id: &str,
    dataset: &Dataset,
    rep: usize,
) -> Vec<RunRecord> {
    let seed = protocol.repetition_seed(rep);
    let split_spec = SplitSpec {
        seed,
        ..protocol.split
    };
    let record = |algorithm: Algorithm| RunRecord {
        dataset: id.to_string(),
        algorithm,
        nu: split_spec.nu,
        achieved_nu: None,
        repetition: rep,
        seed,
        auc: None,
        wall_time_s: 0.0,
        status: RunStatus::Failed,
        reason: None,
        config_hash: protocol.config_hash(id, algorithm, &split_spec),
    };
    let split = match make_oneclass_split(dataset, &split_spec) {
        Ok(s) => s,
        Err(e) => {
            return protocol
                .algorithms
                .iter()
                .map(|&a| RunRecord {
                    reason: Some(format!("split failed: {e}")),
                    ..record(a)
                })
                .collect()
        }
    };
    let exclusion = split.unreachable.clone().or_else(|| {
        (split.below_min_outliers && protocol.enforce_min_outliers).then(|| {
            format!(
                "only {} test outliers remain (minimum {})",
                split.test_outliers(),
                split_spec.min_outliers
            )
        })
    });
    if split.below_min_outliers && !protocol.enforce_min_outliers {
        log::warn!(
            "{id}: only {} test outliers at nu={}",
            split.test_outliers(),
            split_spec.nu
        );
    }
    protocol
        .algorithms
        .iter()
        .map(|&algorithm| {
            let base = RunRecord {
                achieved_nu: Some(split.achieved_nu),
                ..record(algorithm)
            };
            if let Some(reason) = &exclusion {
                return RunRecord {
                    status: RunStatus::DatasetExcluded,
                    reason: Some(reason.clone()),
                    ..base
                };
            }
            let start = Instant::now();
            let outcome = score_algorithm(protocol, algorithm, &split, seed)
                .and_then(|s| ScoredSet::new(s, split.test_labels.clone())?.roc_auc());
            let wall_time_s = start.elapsed().as_secs_f64();
            match outcome {
                Ok(auc) => RunRecord {
                    auc: Some(auc),
                    wall_time_s,
                    status: RunStatus::Ok,
                    ..base
                },
                // Every DOUST member diverging removes the dataset from the
                // comparison rather than counting as a crash.
                Err(e @ Error::AllSubmodelsFailed { .. }) => RunRecord {
                    wall_time_s,
                    status: RunStatus::DatasetExcluded,
                    reason: Some(e.to_string()),
                    ..base
                },
                Err(e) => RunRecord {
                    wall_time_s,
                    status: RunStatus::Failed,
                    reason: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect()
}

/// Runs every algorithm on identical splits of the given datasets.
pub fn run_benchmark_on(
    protocol: &BenchmarkProtocol,
    datasets: &[(String, Dataset)],
) -> Result<BenchmarkOutcome> {
    protocol.validate()?;
    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..protocol.repetitions).map(move |r| (d, r)))
        .collect();
    let records: Vec<RunRecord> = par::map_indexed(jobs.len(), |j| {
        let (d, rep) = jobs[j];
        run_one_repetition(protocol, &datasets[d].0, &datasets[d].1, rep)
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(summarize_records(
        records,
        protocol.alpha,
        protocol.wilcoxon,
    ))
}

/// Loads the protocol's datasets and runs the benchmark. A dataset that fails
/// to load yields failed records instead of aborting the batch.
pub fn run_benchmark(protocol: &BenchmarkProtocol) -> Result<BenchmarkOutcome> {
    protocol.validate()?;
    let mut loaded = Vec::new();
    let mut load_failures = Vec::new();
    for src in &protocol.datasets {
        match load_dataset(&src.path) {
            Ok(d) => loaded.push((src.id.clone(), d)),
            Err(e) => {
                log::error!("{}: {e}", src.id);
                for &algorithm in &protocol.algorithms {
                    load_failures.push(RunRecord {
                        dataset: src.id.clone(),
                        algorithm,
                        nu: protocol.split.nu,
                        achieved_nu: None,
                        repetition: 0,
                        seed: protocol.repetition_seed(0),
                        auc: None,
                        wall_time_s: 0.0,
                        status: RunStatus::Failed,
                        reason: Some(format!("load failed: {e}")),
                        config_hash: protocol.config_hash(&src.id, algorithm, &protocol.split),
                    });
                }
            }
        }
    }
    let outcome = run_benchmark_on(protocol, &loaded)?;
    if load_failures.is_empty() {
        return Ok(outcome);
    }
    let mut records = outcome.records;
    records.extend(load_failures);
    Ok(summarize_records(
        records,
        protocol.alpha,
        protocol.wilcoxon,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub nu: f64,
    pub mean_auc: Option<f64>,
    pub ok_runs: usize,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub records: Vec<RunRecord>,
}

impl SweepOutcome {
    pub fn cell(&self, dataset: &str, algorithm: Algorithm, nu: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.algorithm == algorithm && c.nu == nu)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush().map_err(|e| Error::io("sweep csv", e))
    }
}

/// One benchmark per anomaly fraction with the minimum-outlier rule enforced.
pub fn sweep_nu_on(
    protocol: &BenchmarkProtocol,
    datasets: &[(String, Dataset)],
    grid: &[f64],
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("empty nu grid".into()));
    }
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for &nu in grid {
        let p = BenchmarkProtocol {
            split: SplitSpec {
                nu,
                ..protocol.split
            },
            enforce_min_outliers: true,
            ..protocol.clone()
        };
        let outcome = run_benchmark_on(&p, datasets)?;
        for (id, _) in datasets {
            for &algorithm in &p.algorithms {
                let runs: Vec<&RunRecord> = outcome
                    .records
                    .iter()
                    .filter(|r| &r.dataset == id && r.algorithm == algorithm)
                    .collect();
                cells.push(SweepCell {
                    dataset: id.clone(),
                    algorithm,
                    nu,
                    mean_auc: outcome.mean_auc(id, algorithm),
                    ok_runs: runs.iter().filter(|r| r.status == RunStatus::Ok).count(),
                    excluded: runs.iter().any(|r| r.status == RunStatus::DatasetExcluded),
                });
            }
        }
        records.extend(outcome.records);
    }
    Ok(SweepOutcome { cells, records })
}

pub fn sweep_nu(protocol: &BenchmarkProtocol, grid: &[f64]) -> Result<SweepOutcome> {
    let datasets = protocol
        .datasets
        .iter()
        .map(|s| Ok((s.id.clone(), load_dataset(&s.path)?)))
        .collect::<Result<Vec<_>>>()?;
    sweep_nu_on(protocol, &datasets, grid)
}
