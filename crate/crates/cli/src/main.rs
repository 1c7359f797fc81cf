use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use doust::doust::{train_ensemble, DoustConfig, EnsembleModel};
use doust::harness::{
    emit_score_cdf, load_dataset, make_oneclass_split, read_records_jsonl, run_benchmark,
    save_dataset, summarize_records, sweep_nu, write_records_jsonl, BenchmarkProtocol, SplitSpec,
};
use doust::metrics::WilcoxonOptions;
use doust::synthetic::{
    bayes_auc, gaussian_experiment, guessing_bound, thought_experiment, write_sweep_csv,
    GaussianMethod, GaussianSpec, SweepRow, ThoughtConfig,
};
use doust::Dataset;

#[derive(Parser)]
#[command(
    name = "doust",
    version,
    about = "Test-time-training outlier detection and its evaluation harness"
)]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "DOUST_WORKERS", default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark runs over CSV datasets.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Synthetic experiments.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Significance testing of stored run records.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Plot data.
    #[command(subcommand)]
    Emit(EmitCommand),
    /// Split a dataset, train a DOUST ensemble and save model and split.
    Train(TrainArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// JSON-lines output, one record per run.
        #[arg(long, default_value = "records.jsonl")]
        records: PathBuf,
        /// Significance report output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    SweepNu {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimulateCommand {
    Thought {
        /// Normal counts, comma separated.
        #[arg(
            long = "N",
            value_delimiter = ',',
            default_value = "500,1000,10000,100000,1000000"
        )]
        n: Vec<usize>,
        #[arg(long = "O", default_value_t = 20)]
        o: usize,
        #[arg(long, default_value_t = 0.023)]
        f: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Gaussian {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.01)]
        nu: f64,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        #[arg(long, default_value_t = 10)]
        dims: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Doust)]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Doust,
    SupervisedOracle,
    BayesOracle,
}

impl From<MethodArg> for GaussianMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Doust => GaussianMethod::Doust,
            MethodArg::SupervisedOracle => GaussianMethod::SupervisedOracle,
            MethodArg::BayesOracle => GaussianMethod::BayesOracle,
        }
    }
}

#[derive(Subcommand)]
enum StatsCommand {
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Subcommand)]
enum EmitCommand {
    /// Empirical score CDFs of a training and a test file.
    Cdf {
        #[arg(long)]
        model: PathBuf,
        /// Test-side CSV.
        #[arg(long)]
        data: PathBuf,
        /// Train-side CSV; defaults to the test file.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    /// DOUST settings as JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Directory receiving train.csv and test.csv of the split.
    #[arg(long)]
    split_dir: Option<PathBuf>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_protocol(path: &Path, seed: u64) -> Result<BenchmarkProtocol> {
    let mut p = BenchmarkProtocol::from_json(&read_to_string(path)?)?;
    p.seed = p.seed.wrapping_add(seed);
    Ok(p)
}

/// Returns whether every run succeeded (excluded datasets do not count as
/// failures).
fn run(cli: Cli) -> Result<bool> {
    let seed = cli.seed;
    match cli.command {
        Command::Bench(BenchCommand::Run {
            config,
            records,
            report,
        }) => {
            let protocol = load_protocol(&config, seed)?;
            let outcome = run_benchmark(&protocol)?;
            write_records_jsonl(&outcome.records, BufWriter::new(File::create(&records)?))?;
            for (id, row) in outcome.compared_datasets.iter().zip(&outcome.matrix) {
                let cells: Vec<String> = outcome
                    .algorithms
                    .iter()
                    .zip(row)
                    .map(|(a, v)| format!("{a}={v:.4}"))
                    .collect();
                println!("{id}: {}", cells.join(" "));
            }
            match (&outcome.report, report) {
                (Some(r), Some(path)) => fs::write(path, serde_json::to_string_pretty(r)?)?,
                (Some(r), None) => println!("{}", serde_json::to_string_pretty(r)?),
                (None, _) => log::warn!(
                    "no significance report: {}",
                    outcome.report_note.as_deref().unwrap_or("")
                ),
            }
            Ok(!outcome.has_failures())
        }
        Command::Bench(BenchCommand::SweepNu {
            config,
            grid,
            out,
            records,
        }) => {
            let protocol = load_protocol(&config, seed)?;
            let sweep = sweep_nu(&protocol, &grid)?;
            sweep.write_csv(BufWriter::new(File::create(&out)?))?;
            if let Some(path) = records {
                write_records_jsonl(&sweep.records, BufWriter::new(File::create(path)?))?;
            }
            Ok(!sweep
                .records
                .iter()
                .any(|r| r.status == doust::harness::RunStatus::Failed))
        }
        Command::Simulate(SimulateCommand::Thought { n, o, f, reps, out }) => {
            let mut rows = Vec::new();
            for &n_normal in &n {
                let cfg = ThoughtConfig {
                    n_normal,
                    n_outliers: o,
                    tail_fraction: f,
                    repetitions: reps,
                    seed,
                    ..Default::default()
                };
                let s = thought_experiment(&cfg)?;
                eprintln!(
                    "N={n_normal}: P(right)={:.3} auc one-sided={:.4} two-sided={:.4} mistakes one-sided={:.1} two-sided={:.1}",
                    s.p_right, s.mean_auc_one_sided, s.mean_auc_two_sided, s.mean_mistakes_one_sided, s.mean_mistakes_two_sided
                );
                for (rep, t) in s.trials.iter().enumerate() {
                    let side = serde_json::to_value(t.chosen)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string();
                    for (method, auc, mistakes) in [
                        ("one_sided", t.auc_one_sided, t.mistakes_one_sided),
                        ("two_sided", t.auc_two_sided, t.mistakes_two_sided),
                    ] {
                        rows.push(SweepRow {
                            n: n_normal,
                            outliers: Some(o),
                            nu: None,
                            repetition: rep,
                            method: method.into(),
                            auc,
                            chosen_side: Some(side.clone()),
                            mistakes: Some(mistakes),
                        });
                    }
                }
            }
            eprintln!("guessing bound A/(2f) = {:.1}", guessing_bound(o, f));
            write_sweep_csv(&rows, output(out.as_deref())?)?;
            Ok(true)
        }
        Command::Simulate(SimulateCommand::Gaussian {
            n_grid,
            nu,
            reps,
            dims,
            method,
            out,
        }) => {
            let mut rows = Vec::new();
            for &n in &n_grid {
                let spec = GaussianSpec {
                    repetitions: reps,
                    seed,
                    ..GaussianSpec::new(dims, nu, n)
                };
                let res = gaussian_experiment(&spec, method.into())?;
                eprintln!(
                    "N={n}: mean AUC {:.4} (stderr {:.4}, {} failed; Bayes {:.4})",
                    res.mean_auc,
                    res.stderr.unwrap_or(f64::NAN),
                    res.failures,
                    bayes_auc(&spec)
                );
                let name = serde_json::to_value(res.method)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                for (rep, &auc) in res.aucs.iter().enumerate() {
                    rows.push(SweepRow {
                        n,
                        outliers: None,
                        nu: Some(nu),
                        repetition: rep,
                        method: name.clone(),
                        auc,
                        chosen_side: None,
                        mistakes: None,
                    });
                }
            }
            write_sweep_csv(&rows, output(out.as_deref())?)?;
            Ok(true)
        }
        Command::Stats(StatsCommand::Report { records, alpha }) => {
            let file =
                File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let recs = read_records_jsonl(BufReader::new(file))?;
            let outcome = summarize_records(recs, alpha, WilcoxonOptions::default());
            match &outcome.report {
                Some(r) => println!("{}", serde_json::to_string_pretty(r)?),
                None => bail!(
                    "cannot compare: {}",
                    outcome.report_note.unwrap_or_default()
                ),
            }
            Ok(!outcome.has_failures())
        }
        Command::Emit(EmitCommand::Cdf {
            model,
            data,
            train,
            out,
        }) => {
            let model = EnsembleModel::from_json(&read_to_string(&model)?)?;
            let test = load_dataset(&data)?;
            let train = match train {
                Some(p) => load_dataset(p)?,
                None => test.clone(),
            };
            let a = model.score(train.features.view())?;
            let b = model.score(test.features.view())?;
            emit_score_cdf(&a.to_vec(), &b.to_vec(), output(out.as_deref())?)?;
            Ok(true)
        }
        Command::Train(args) => {
            let dataset = load_dataset(&args.data)?;
            let mut config: DoustConfig = match &args.config {
                Some(p) => serde_json::from_str(&read_to_string(p)?)?,
                None => DoustConfig::default(),
            };
            config.seed = config.seed.wrapping_add(seed);
            let split = make_oneclass_split(
                &dataset,
                &SplitSpec {
                    nu: args.nu,
                    seed,
                    ..Default::default()
                },
            )?;
            if let Some(reason) = &split.unreachable {
                bail!("{reason}");
            }
            let model = train_ensemble(split.train.view(), split.test.view(), &config)?;
            fs::write(&args.out, model.to_json()?)?;
            eprintln!(
                "{} of {} submodels ok",
                model.ok_count(),
                model.submodels().len()
            );
            if let Some(dir) = args.split_dir {
                fs::create_dir_all(&dir)?;
                let names = dataset.feature_names.clone();
                let train_labels = vec![0; split.train.nrows()];
                save_dataset(
                    &Dataset::with_names(split.train, train_labels, names.clone())?,
                    dir.join("train.csv"),
                )?;
                save_dataset(
                    &Dataset::with_names(split.test, split.test_labels, names)?,
                    dir.join("test.csv"),
                )?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.workers > 0 && !doust::par::configure_workers(cli.workers) {
        log::warn!("worker count {} ignored", cli.workers);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some runs failed; see the records");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
