//! Command-line surface: `train`, `eval`, `analyze`, `storage`, `fit1d`,
//! `dump`.
//!
//! Train runs are driven by a TOML config (dataset, network, trainer,
//! output blocks); one-shot commands take flags. Every run is deterministic
//! given its config: seeds are mandatory, nothing falls back to wall-clock
//! entropy. Exit codes: 0 success/accepted, 2 config error, 3 io error,
//! 4 training exhausted, 5 data error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::approx::{self, FitConfig};
use crate::datapipe::tabular::{load_csv, Schema};
use crate::datapipe::{self, mnist, resample, stratified_split, synth, DataSet};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::NetworkSpec;
use crate::store;
use crate::trainer::{self, DataSplits, TrainConfig, TrainStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_EXHAUSTED: i32 = 4;
pub const EXIT_DATA: i32 = 5;

fn default_train_fraction() -> f64 {
    0.7
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_smote_k() -> usize {
    5
}
fn default_positive_fraction() -> f64 {
    0.02
}
fn default_noise() -> f64 {
    0.3
}

/// Training-set rebalancing choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampler {
    #[default]
    None,
    Undersample,
    Oversample,
    Smote,
}

/// The `[dataset]` block of a run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    /// IDX image/label files; train/val carved sequentially from the train
    /// pair, pixels kept in [0, 1].
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        train_n: Option<usize>,
        #[serde(default)]
        val_n: Option<usize>,
        #[serde(default)]
        test_n: Option<usize>,
    },
    /// Schema-driven CSV: stratified split, train-fitted standardization,
    /// optional resampling of the training partition.
    Csv {
        path: PathBuf,
        schema: PathBuf,
        split_seed: u64,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        #[serde(default)]
        resampler: Resampler,
        #[serde(default = "default_smote_k")]
        smote_k: usize,
    },
    /// Bipolar XOR with Gaussian jitter.
    Xor {
        seed: u64,
        train_n: usize,
        val_n: usize,
        test_n: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// Synthetic 28x28 ten-class digit mimic.
    Digits {
        seed: u64,
        train_n: usize,
        val_n: usize,
        test_n: usize,
    },
    /// Fraud-shaped CSV mimic written to `path`, then fed through the CSV
    /// pipeline with the built-in fraud schema.
    FraudLike {
        path: PathBuf,
        n: usize,
        seed: u64,
        split_seed: u64,
        #[serde(default = "default_positive_fraction")]
        positive_fraction: f64,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        #[serde(default)]
        resampler: Resampler,
        #[serde(default = "default_smote_k")]
        smote_k: usize,
    },
    /// Credit-default-shaped CSV mimic written to `path`.
    DefaultLike {
        path: PathBuf,
        n: usize,
        seed: u64,
        split_seed: u64,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        #[serde(default)]
        resampler: Resampler,
        #[serde(default = "default_smote_k")]
        smote_k: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    pub model: PathBuf,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub sparsity: Option<PathBuf>,
}

/// A full training run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub trainer: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Checks everything that can be checked before any compute: value
    /// ranges and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.network.layer_sizes.len() < 3 {
            return Err(Error::Config("network needs at least 3 layer sizes".into()));
        }
        let must_exist = |p: &Path, what: &str| -> Result<()> {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "{what} path does not exist: {}",
                    p.display()
                )));
            }
            Ok(())
        };
        match &self.dataset {
            DatasetConfig::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                must_exist(train_images, "train_images")?;
                must_exist(train_labels, "train_labels")?;
                must_exist(test_images, "test_images")?;
                must_exist(test_labels, "test_labels")?;
            }
            DatasetConfig::Csv { path, schema, .. } => {
                must_exist(path, "csv")?;
                must_exist(schema, "schema")?;
            }
            // mimics write their own csv; only the parent must exist
            DatasetConfig::FraudLike { path, .. } | DatasetConfig::DefaultLike { path, .. } => {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() && !parent.exists() {
                        return Err(Error::Config(format!(
                            "output directory for mimic csv does not exist: {}",
                            parent.display()
                        )));
                    }
                }
            }
            DatasetConfig::Xor { .. } | DatasetConfig::Digits { .. } => {}
        }
        Ok(())
    }
}

/// Materialized train/validation/test partitions.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: DataSet,
    pub val: DataSet,
    pub test: DataSet,
}

fn carve_val(pool: &DataSet, train_n: usize, val_n: usize) -> Result<(DataSet, DataSet)> {
    if train_n + val_n > pool.len() {
        return Err(Error::Data(format!(
            "need {train_n} train + {val_n} val examples, pool has {}",
            pool.len()
        )));
    }
    let train_idx: Vec<usize> = (0..train_n).collect();
    let val_idx: Vec<usize> = (train_n..train_n + val_n).collect();
    Ok((pool.subset(&train_idx), pool.subset(&val_idx)))
}

fn csv_pipeline(
    ds: DataSet,
    split_seed: u64,
    train_fraction: f64,
    val_fraction: f64,
    resampler: Resampler,
    smote_k: usize,
) -> Result<LoadedData> {
    let (train_pool, test) = stratified_split(&ds, train_fraction, split_seed)?;
    // validation carved from the training pool, stratified again
    let (mut train, mut val) = stratified_split(&train_pool, 1.0 - val_fraction, split_seed ^ 0x5A)?;
    let mut test = test;
    datapipe::standardize_with_train_stats(&mut train, &mut [&mut val, &mut test])?;
    let train = match resampler {
        Resampler::None => train,
        Resampler::Undersample => resample::undersample(&train, split_seed ^ 0xA5)?,
        Resampler::Oversample => resample::oversample_repeat(&train, split_seed ^ 0xA5)?,
        Resampler::Smote => resample::smote(&train, smote_k, split_seed ^ 0xA5)?,
    };
    Ok(LoadedData { train, val, test })
}

/// Loads the three partitions a dataset config describes.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<LoadedData> {
    match cfg {
        DatasetConfig::Mnist {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_n,
            val_n,
            test_n,
        } => {
            let pool = mnist::load_mnist(train_images, train_labels)?;
            let test_full = mnist::load_mnist(test_images, test_labels)?;
            let train_n = train_n.unwrap_or(pool.len() * 9 / 10);
            let val_n = val_n.unwrap_or((train_n / 10).max(1));
            let (train, val) = carve_val(&pool, train_n, val_n)?;
            let test = test_full.take(test_n.unwrap_or(test_full.len()));
            Ok(LoadedData { train, val, test })
        }
        DatasetConfig::Csv {
            path,
            schema,
            split_seed,
            train_fraction,
            val_fraction,
            resampler,
            smote_k,
        } => {
            let schema = Schema::from_path(schema)?;
            let ds = load_csv(path, &schema)?;
            csv_pipeline(
                ds,
                *split_seed,
                *train_fraction,
                *val_fraction,
                *resampler,
                *smote_k,
            )
        }
        DatasetConfig::Xor {
            seed,
            train_n,
            val_n,
            test_n,
            noise,
        } => Ok(LoadedData {
            train: synth::xor_noise(*train_n, *noise, *seed),
            val: synth::xor_noise(*val_n, *noise, seed.wrapping_add(1)),
            test: synth::xor_noise(*test_n, *noise, seed.wrapping_add(2)),
        }),
        DatasetConfig::Digits {
            seed,
            train_n,
            val_n,
            test_n,
        } => Ok(LoadedData {
            train: synth::digits(*train_n, *seed),
            val: synth::digits(*val_n, seed.wrapping_add(1)),
            test: synth::digits(*test_n, seed.wrapping_add(2)),
        }),
        DatasetConfig::FraudLike {
            path,
            n,
            seed,
            split_seed,
            positive_fraction,
            train_fraction,
            val_fraction,
            resampler,
            smote_k,
        } => {
            synth::write_fraud_like_csv(path, *n, *positive_fraction, *seed)?;
            let ds = load_csv(path, &synth::fraud_schema())?;
            csv_pipeline(
                ds,
                *split_seed,
                *train_fraction,
                *val_fraction,
                *resampler,
                *smote_k,
            )
        }
        DatasetConfig::DefaultLike {
            path,
            n,
            seed,
            split_seed,
            train_fraction,
            val_fraction,
            resampler,
            smote_k,
        } => {
            synth::write_default_like_csv(path, *n, *seed)?;
            let ds = load_csv(path, &synth::credit_default_schema())?;
            csv_pipeline(
                ds,
                *split_seed,
                *train_fraction,
                *val_fraction,
                *resampler,
                *smote_k,
            )
        }
    }
}

/// Runs a full training job from a config file. Writes the model file, the
/// per-epoch curve report (config echoed in its preamble) and the sparsity
/// report; returns the training status.
pub fn cmd_train(config_path: &Path) -> Result<TrainStatus> {
    let cfg = RunConfig::from_path(config_path)?;
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let spec = NetworkSpec::new(cfg.network.layer_sizes.clone())?;

    let outcome = trainer::train(
        &spec,
        &DataSplits {
            train: &data.train,
            val: &data.val,
            test: &data.test,
        },
        &cfg.trainer,
    )?;

    store::write_model(&cfg.output.model, &outcome.model)?;

    let report_path = cfg
        .output
        .report
        .clone()
        .unwrap_or_else(|| cfg.output.model.with_extension("report.tsv"));
    let resolved = toml::to_string_pretty(&cfg)
        .map_err(|e| Error::Config(format!("cannot re-serialize config: {e}")))?;
    let preamble: Vec<String> = resolved.lines().map(str::to_string).collect();
    let mut report_file = std::fs::File::create(&report_path)?;
    outcome.report.write_tabular(&mut report_file, &preamble)?;

    let sparsity_path = cfg
        .output
        .sparsity
        .clone()
        .unwrap_or_else(|| cfg.output.model.with_extension("sparsity.txt"));
    std::fs::write(
        &sparsity_path,
        analysis::analyze(&outcome.model).to_string(),
    )?;

    eprintln!(
        "status={:?} epochs={} final_val_accuracy={:.4} model={}",
        outcome.report.status,
        outcome.report.rows.len(),
        outcome.report.final_val_accuracy,
        cfg.output.model.display()
    );
    Ok(outcome.report.status)
}

/// Evaluates a stored model on the test split of a dataset config (a full
/// run config or any TOML with a `[dataset]` block). Prints stable
/// `key=value` lines at three decimals.
pub fn cmd_eval(model_path: &Path, dataset_config_path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct EvalConfig {
        dataset: DatasetConfig,
    }
    let text = std::fs::read_to_string(dataset_config_path)?;
    let cfg: EvalConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    let model = store::read_model(model_path)?;
    let data = load_dataset(&cfg.dataset)?;
    let cm = metrics::evaluate(&model, &data.test)?;

    let mut out = String::new();
    out.push_str(&format!("examples={}\n", cm.total()));
    out.push_str(&format!("accuracy={:.3}\n", cm.accuracy()));
    if cm.n_classes() == 2 {
        let s = metrics::scores(&cm, 1)?;
        out.push_str(&format!("precision={:.3}\n", s.precision));
        out.push_str(&format!("recall={:.3}\n", s.recall));
        out.push_str(&format!("f1={:.3}\n", s.f1));
        out.push_str(&format!("g_mean={:.3}\n", s.g_mean));
    }
    Ok(out)
}

/// Sparsity report of a stored model, optionally written to a file.
pub fn cmd_analyze(model_path: &Path, out_path: Option<&Path>) -> Result<String> {
    let model = store::read_model(model_path)?;
    let text = analysis::analyze(&model).to_string();
    if let Some(p) = out_path {
        std::fs::write(p, &text)?;
    }
    Ok(text)
}

/// Storage comparison table, either for explicit (N, p0) or for a stored
/// model's actual counts.
pub fn cmd_storage(
    model_path: Option<&Path>,
    weights: Option<u64>,
    sparsity: Option<f64>,
) -> Result<String> {
    let (n, p0) = match (model_path, weights, sparsity) {
        (Some(path), None, None) => {
            let model = store::read_model(path)?;
            (model.weight_positions() as u64, model.sparsity())
        }
        (None, Some(n), Some(p0)) => (n, p0),
        _ => {
            return Err(Error::Config(
                "provide either --model, or both --weights and --sparsity".into(),
            ))
        }
    };
    let rows = store::storage_table(n, p0)?;
    Ok(format!(
        "weights={n}\n{}",
        store::format_storage_table(&rows)
    ))
}

fn parse_target(name: &str) -> Result<Box<dyn Fn(f64) -> f64>> {
    match name {
        "zero" => Ok(Box::new(|_| 0.0)),
        "sin" => Ok(Box::new(f64::sin)),
        "cos" => Ok(Box::new(f64::cos)),
        "abs" => Ok(Box::new(f64::abs)),
        other => {
            if let Some(rest) = other.strip_prefix("bump:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() == 2 {
                    let rho: f64 = parts[0]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad rho in target \"{other}\"")))?;
                    let chi: f64 = parts[1]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad chi in target \"{other}\"")))?;
                    return Ok(Box::new(move |x| approx::bump_value(rho, chi, x)));
                }
            }
            Err(Error::Config(format!(
                "unknown target \"{other}\" (try zero, sin, cos, abs, bump:RHO,CHI)"
            )))
        }
    }
}

/// Greedy bump fit of a named 1-D target; emits `x target approximation`
/// rows plus a trailing summary comment.
pub fn cmd_fit1d(
    target: &str,
    from: f64,
    to: f64,
    bumps: usize,
    grid_points: usize,
    out_path: Option<&Path>,
) -> Result<String> {
    if !(from < to) {
        return Err(Error::Config(format!("empty interval [{from}, {to}]")));
    }
    if grid_points < 2 {
        return Err(Error::Config("grid needs at least 2 points".into()));
    }
    let f = parse_target(target)?;
    let grid = approx::sample_grid(from, to, grid_points, &f);
    let fit = approx::fit_1d(&grid, bumps, &FitConfig::for_interval(from, to));

    let mut out = String::from("x\ttarget\tapproximation\n");
    for &(x, t) in &grid {
        out.push_str(&format!("{x:.6}\t{t:.6}\t{:.6}\n", fit.evaluate(x)));
    }
    out.push_str(&format!(
        "# bumps={} hidden_neurons={} sup_error={:.6}\n",
        fit.terms.len(),
        fit.hidden_neurons(),
        fit.sup_error(&grid)
    ));
    if let Some(p) = out_path {
        std::fs::write(p, &out)?;
    }
    Ok(out)
}

/// Annotated hexdump of a model file.
pub fn cmd_dump(model_path: &Path) -> Result<String> {
    let bytes = std::fs::read(model_path)?;
    store::annotated_hexdump(&bytes)
}

// -- argument parsing and dispatch --

#[derive(Parser)]
#[command(
    name = "lwn",
    about = "Ternary-weight networks: train, evaluate, analyze, compress",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML run config; writes model, curves and sparsity report
    Train {
        config: PathBuf,
        /// Data-parallel gradient chunks (overrides the config)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate a stored model on a dataset config's test split
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the sparsity report of a stored model
    Analyze {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the storage comparison table
    Storage {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Total weight positions N
        #[arg(long)]
        weights: Option<u64>,
        /// Zero-weight fraction p0 in [0, 1]
        #[arg(long)]
        sparsity: Option<f64>,
    },
    /// Fit a 1-D target with ternary bumps and emit plot data
    Fit1d {
        #[arg(long, default_value = "sin")]
        target: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        to: f64,
        #[arg(long, default_value_t = 40)]
        bumps: usize,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotated hexdump of a model file
    Dump { model: PathBuf },
}

/// Parses `args` (argv-style, program name first) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };

    let result: Result<String> = match cli.command {
        Command::Train { config, threads } => match run_train(&config, threads) {
            Ok(TrainStatus::RoundedAccepted) => Ok(String::new()),
            Ok(TrainStatus::Exhausted) => return EXIT_EXHAUSTED,
            Ok(TrainStatus::Running) => unreachable!("train never returns a running status"),
            Err(e) => Err(e),
        },
        Command::Eval { model, config } => cmd_eval(&model, &config),
        Command::Analyze { model, out } => cmd_analyze(&model, out.as_deref()),
        Command::Storage {
            model,
            weights,
            sparsity,
        } => cmd_storage(model.as_deref(), weights, sparsity),
        Command::Fit1d {
            target,
            from,
            to,
            bumps,
            grid,
            out,
        } => cmd_fit1d(&target, from, to, bumps, grid, out.as_deref()),
        Command::Dump { model } => cmd_dump(&model),
    };

    match result {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_train(config: &Path, threads: Option<usize>) -> Result<TrainStatus> {
    match threads {
        None => cmd_train(config),
        Some(t) => {
            // thread override: rewrite the parsed config before running
            let mut cfg = RunConfig::from_path(config)?;
            cfg.trainer.threads = t;
            cfg.validate()?;
            let data = load_dataset(&cfg.dataset)?;
            let spec = NetworkSpec::new(cfg.network.layer_sizes.clone())?;
            let outcome = trainer::train(
                &spec,
                &DataSplits {
                    train: &data.train,
                    val: &data.val,
                    test: &data.test,
                },
                &cfg.trainer,
            )?;
            store::write_model(&cfg.output.model, &outcome.model)?;
            Ok(outcome.report.status)
        }
    }
}
