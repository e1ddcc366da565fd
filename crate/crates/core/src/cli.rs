//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error
//! (I/O, malformed data, non-finite loss).
//!
//! Output files:
//!
//! | subcommand        | files                                                   |
//! |-------------------|---------------------------------------------------------|
//! | `train`           | `metrics.csv`, `timing.csv`, `checkpoint.bin`, `config.json` |
//! | `eval`            | `predictions.csv` (`index,predicted,true`)              |
//! | `ablate-icp-rate` | `icp_rate_ablation.csv` (`rate,status,test_error`)      |
//! | `loss-surface`    | `loss_surface_ff.csv`, `loss_surface_symba.csv` (`g_pos,g_neg,loss`) |
//! | `compare`         | `compare.csv` (`epoch,algorithm,labeling,test_accuracy`) |

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::dataio::{self, Dataset, DatasetKind, Split, DATA_ROOT_ENV};
use crate::error::Error;
use crate::inference;
use crate::losses::{loss_surface, LossConfig};
use crate::trainer::{self, checkpoint_load, checkpoint_save, Algorithm, LabelingKind, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "symba", version, about = "Layer-local FF / SymBa training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write metrics, checkpoint and resolved config.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train one model per ICP rate and tabulate test error.
    AblateIcpRate(AblateArgs),
    /// Export FF and SymBa loss values over a goodness grid.
    LossSurface(SurfaceArgs),
    /// Train FF and SymBa on the same budget and join their accuracy curves.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON training config; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Directory holding the datasets.
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    /// Fail unless the checkpoint was trained with this labeling.
    #[arg(long, value_parser = parse_labeling)]
    pub labeling: Option<LabelingKind>,
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated ICP rates.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])]
    pub rates: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Use the config's labeling for both runs instead of overlay for FF and
    /// ICP for SymBa.
    #[arg(long)]
    pub same_labeling: bool,
}

fn parse_labeling(s: &str) -> Result<LabelingKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parameter(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::AblateIcpRate(a) => cmd_ablate_icp_rate(&a),
        Command::LossSurface(a) => cmd_loss_surface(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

/// Config file (or defaults) with command-line overrides applied, validated.
pub fn resolve_config(args: &RunArgs) -> CliResult<TrainConfig> {
    let mut cfg = match &args.config {
        Some(p) if !p.exists() => {
            return Err(CliError::usage(format!("config file {} does not exist", p.display())))
        }
        Some(p) => TrainConfig::from_path(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if args.train_limit.is_some() {
        cfg.train_limit = args.train_limit;
    }
    if args.test_limit.is_some() {
        cfg.test_limit = args.test_limit;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_root(explicit: Option<&Path>) -> CliResult<PathBuf> {
    let root = dataio::resolve_data_root(explicit).ok_or_else(|| {
        CliError::usage(format!("no data root: pass --data-root or set {DATA_ROOT_ENV}"))
    })?;
    if !root.is_dir() {
        return Err(CliError::usage(format!("data root {} is not a directory", root.display())));
    }
    Ok(root)
}

/// Loads both splits, truncated to the configured limits.
pub fn load_datasets(root: &Path, kind: DatasetKind, cfg: &TrainConfig) -> CliResult<(Dataset, Dataset)> {
    let mut train = dataio::load(root, kind, Split::Train)?;
    let mut test = dataio::load(root, kind, Split::Test)?;
    if let Some(n) = cfg.train_limit {
        train = train.head(n);
    }
    if let Some(n) = cfg.test_limit {
        test = test.head(n);
    }
    Ok((train, test))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

pub fn cmd_train(args: &RunArgs) -> CliResult {
    let cfg = resolve_config(args)?;
    let root = data_root(args.data_root.as_deref())?;
    create_dir(&args.out)?;
    let (train, test) = load_datasets(&root, cfg.dataset, &cfg)?;
    info!("training {} on {} ({} train / {} test)", cfg.algorithm, cfg.dataset, train.len(), test.len());
    let outcome = trainer::train(&cfg, &train, &test)?;
    trainer::write_metrics_csv(&args.out.join("metrics.csv"), &outcome.metrics)?;
    trainer::write_timing_csv(&args.out.join("timing.csv"), &outcome.metrics)?;
    checkpoint_save(&outcome.checkpoint, &args.out.join("checkpoint.bin"))?;
    let cfg_path = args.out.join("config.json");
    fs::write(&cfg_path, cfg.to_json()).map_err(|e| Error::io(&cfg_path, e))?;
    if let Some(e) = outcome.final_test_error() {
        println!("test error: {e:.2}%");
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    if !args.checkpoint.exists() {
        return Err(CliError::usage(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    let ckpt = checkpoint_load(&args.checkpoint)?;
    let root = data_root(args.data_root.as_deref())?;
    create_dir(&args.out)?;
    let mut test = dataio::load(&root, ckpt.config.dataset, Split::Test)?;
    if let Some(n) = args.test_limit.or(ckpt.config.test_limit) {
        test = test.head(n);
    }
    let preds = inference::classify(&ckpt, &test.images, args.labeling)?;
    inference::write_predictions_csv(&args.out.join("predictions.csv"), &preds, &test.labels)?;
    println!("test error: {:.2}%", inference::test_error(&preds, &test.labels)?);
    Ok(())
}

pub fn cmd_ablate_icp_rate(args: &AblateArgs) -> CliResult {
    let mut base = resolve_config(&args.run)?;
    if base.algorithm == Algorithm::Bp {
        return Err(CliError::usage("ICP ablation needs algorithm ff or symba"));
    }
    base.labeling = LabelingKind::Icp;
    if args.rates.is_empty() {
        return Err(CliError::usage("--rates must list at least one rate"));
    }
    let root = data_root(args.run.data_root.as_deref())?;
    create_dir(&args.run.out)?;
    let (train, test) = load_datasets(&root, base.dataset, &base)?;

    let path = args.run.out.join("icp_rate_ablation.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record(["rate", "status", "test_error"]).map_err(Error::from)?;
    for &rate in &args.rates {
        let cfg = TrainConfig {
            icp_rate: rate,
            ..base.clone()
        };
        let row = match cfg.validate().and_then(|_| trainer::train(&cfg, &train, &test)) {
            Ok(out) => {
                let e = out.final_test_error().unwrap_or(f64::NAN);
                info!("rate {rate}: test error {e:.2}%");
                vec![rate.to_string(), "ok".into(), e.to_string()]
            }
            // A pattern too sparse to exist and a diverging loss are both
            // outcomes of the sweep, not failures of it.
            Err(e @ (Error::NonFinite { .. } | Error::Parameter(_) | Error::Config(_))) => {
                warn!("rate {rate}: {e}");
                vec![rate.to_string(), "NaN".into(), String::new()]
            }
            Err(e) => return Err(e.into()),
        };
        w.write_record(&row).map_err(Error::from)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn cmd_loss_surface(args: &SurfaceArgs) -> CliResult {
    if !(args.step > 0.0) || !(args.max > args.min) {
        return Err(CliError::usage("--step must be > 0 and --max > --min"));
    }
    let resolution = ((args.max - args.min) / args.step).round() as usize + 1;
    create_dir(&args.out)?;
    for (name, cfg) in [
        ("ff", LossConfig::Ff { theta: args.theta }),
        ("symba", LossConfig::Symba { alpha: args.alpha }),
    ] {
        let grid = loss_surface(&cfg, args.min, args.max, resolution)?;
        let path = args.out.join(format!("loss_surface_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(["g_pos", "g_neg", "loss"]).map_err(Error::from)?;
        for p in grid {
            w.write_record(&[p.g_pos.to_string(), p.g_neg.to_string(), p.loss.to_string()])
                .map_err(Error::from)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> CliResult {
    let base = resolve_config(&args.run)?;
    let root = data_root(args.run.data_root.as_deref())?;
    create_dir(&args.run.out)?;
    let (train, test) = load_datasets(&root, base.dataset, &base)?;

    let runs = [(Algorithm::Ff, LabelingKind::Overlay), (Algorithm::Symba, LabelingKind::Icp)];
    let path = args.run.out.join("compare.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record(["epoch", "algorithm", "labeling", "test_accuracy"])
        .map_err(Error::from)?;
    for (algorithm, default_labeling) in runs {
        let labeling = if args.same_labeling && base.labeling != LabelingKind::None {
            base.labeling
        } else {
            default_labeling
        };
        let cfg = TrainConfig {
            algorithm,
            labeling,
            eval_every: 1,
            ..base.clone()
        };
        cfg.validate()?;
        let out = trainer::train(&cfg, &train, &test)?;
        for m in &out.metrics {
            let acc = m.test_error.map(|e| (100.0 - e).to_string()).unwrap_or_default();
            w.write_record(&[m.epoch.to_string(), algorithm.to_string(), labeling.to_string(), acc])
                .map_err(Error::from)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
