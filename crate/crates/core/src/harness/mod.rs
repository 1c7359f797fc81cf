//! Dataset ingestion, the one-class benchmark protocol, run records and
//! plot-data emission. Unsupervised algorithms only ever receive feature
//! views; test labels reach the supervised reference through its folds.

mod bench;
mod cdf;
mod io;
mod split;

pub use bench::{
    read_records_jsonl, run_benchmark, run_benchmark_on, summarize_records, sweep_nu, sweep_nu_on,
    write_records_jsonl, Algorithm, BenchmarkOutcome, BenchmarkProtocol, DatasetSource,
    KnnSettings, RunRecord, RunStatus, SweepCell, SweepOutcome,
};
pub use cdf::{
    emit_score_cdf, empirical_cdf, ks_from_points, read_score_cdf, score_cdf_points, CdfPoint,
};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, LABEL_COLUMN};
pub use split::{make_oneclass_split, OneClassSplit, SplitSpec};
