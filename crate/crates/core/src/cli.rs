//! The `milvad` command line.
//!
//! Every subcommand accepts `--config <file>`, a flat UTF-8 file of
//! `key = value` lines whose keys are the long flag names (`_` and `-` are
//! interchangeable, `#` starts a comment). Flags given on the command line
//! override config-file keys, which override built-in defaults. Unknown keys
//! are rejected.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;

use crate::eval::{self, BagScorer, ConstantScorer, TruthScorer};
use crate::features::{build_bag, load_features, segmentize, DatasetManifest, ManifestEntry, Split, Stream};
use crate::objective::ObjectiveConfig;
use crate::optim::{sweep_grid, OptimizerKind};
use crate::scorer::ScoringNetwork;
use crate::synth::{generate, SynthSpec};
use crate::trainer::{self, TrainConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const ROC_FILE: &str = "roc.csv";
pub const FRAME_SCORES_FILE: &str = "frame_scores.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Parser)]
#[command(name = "milvad", version, about = "Weakly-supervised video anomaly scoring")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (feature files plus train/test manifests).
    Gen(GenArgs),
    /// Train a scoring network on a training manifest.
    Train(TrainArgs),
    /// Evaluate frame-level ROC/AUC on a test manifest.
    Eval(EvalArgs),
    /// Print per-segment scores for one video.
    Score(ScoreArgs),
    /// Train and evaluate every optimizer / learning-rate cell.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (required).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Per-stream feature dimension (required).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub num_normal: usize,
    #[arg(long, default_value_t = 40)]
    pub num_abnormal: usize,
    #[arg(long, default_value_t = 10)]
    pub test_normal: usize,
    #[arg(long, default_value_t = 10)]
    pub test_abnormal: usize,
    #[arg(long, default_value_t = 32)]
    pub min_clips: usize,
    #[arg(long, default_value_t = 96)]
    pub max_clips: usize,
    /// Norm of the anomalous mean shift.
    #[arg(long, default_value_t = 4.0)]
    pub separability: f64,
    #[arg(long, default_value_t = 0.25)]
    pub anomaly_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Flags shared by `train` and `sweep`.
#[derive(Debug, Args, Clone)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    /// Abnormal/normal bag pairs per batch.
    #[arg(long, default_value_t = 30)]
    pub batch_pairs: usize,
    /// Sparsity weight.
    #[arg(long, default_value_t = 0.00008)]
    pub lambda1: f64,
    /// Temporal smoothness weight.
    #[arg(long, default_value_t = 0.00008)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.6)]
    pub dropout: f64,
    #[arg(long, default_value_t = 3000)]
    pub iterations: usize,
    /// rgb, flow or fused.
    #[arg(long, default_value = "fused")]
    pub stream: Stream,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub checkpoint_every: usize,
    /// L2 penalty on weight matrices.
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    /// Record per-iteration wall time in the loss log (0 when false).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub timing: bool,
}

impl TrainFlags {
    fn to_config(&self, optimizer: OptimizerKind, learning_rate: f64) -> Result<TrainConfig> {
        let config = TrainConfig {
            batch_pairs: self.batch_pairs,
            iterations: self.iterations,
            seed: self.seed,
            objective: ObjectiveConfig::new(self.margin, self.lambda1, self.lambda2)?,
            optimizer,
            learning_rate,
            dropout_rate: self.dropout,
            checkpoint_every: self.checkpoint_every,
            stream: self.stream,
            segments: self.segments,
            weight_decay: self.weight_decay,
            record_time: self.timing,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training manifest (required).
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    /// Directory for model.vmc, loss.csv and train.state (required).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// adagrad or adam.
    #[arg(long, default_value = "adagrad")]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Continue from the state file in --out-dir.
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub resume: bool,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Test manifest with frame spans (required).
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,
    /// Model checkpoint (required unless --reference is given).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score with a reference instead of a model: `truth` or `constant`.
    #[arg(long)]
    pub reference: Option<String>,
    /// Directory for roc.csv and frame_scores.csv (required).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value = "fused")]
    pub stream: Stream,
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    /// Accepted for uniformity; evaluation is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model checkpoint (required).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Feature file, or a stem with .rgb.vfe/.flow.vfe companions (required).
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value = "fused")]
    pub stream: Stream,
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    /// Accepted for uniformity; scoring is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,
    /// One sub-directory per cell plus sweep.csv (required).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

fn required<T: Clone>(value: &Option<T>, key: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

/// Parses a flat `key = value` file.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", n + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Returns the argument list with config-file keys spliced in ahead of the
/// command-line flags, so later (command-line) occurrences win.
fn merge_config(args: &[OsString], sub: &str, config: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", config.display())))?;
    let keys = parse_config_file(&text)?;
    let cmd = Cli::command();
    let sub_cmd = cmd
        .find_subcommand(sub)
        .ok_or_else(|| Error::Config(format!("unknown subcommand {sub}")))?;
    let known: Vec<String> = sub_cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "config" && l != "help")
        .collect();
    let mut merged = args[..2].to_vec();
    for (k, v) in &keys {
        if !known.contains(k) {
            return Err(Error::Config(format!("unknown config key `{k}` for `{sub}`")));
        }
        merged.push(format!("--{k}={v}").into());
    }
    merged.extend_from_slice(&args[2..]);
    Ok(merged)
}

fn config_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Gen(a) => a.config.as_ref(),
        Command::Train(a) => a.config.as_ref(),
        Command::Eval(a) => a.config.as_ref(),
        Command::Score(a) => a.config.as_ref(),
        Command::Sweep(a) => a.config.as_ref(),
    }
}

fn parse(args: &[OsString], out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<Cli, i32> {
    let report = |e: clap::Error, out: &mut dyn Write, err: &mut dyn Write| {
        let code = e.exit_code();
        let text = e.render().to_string();
        let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
        if code == 0 { EXIT_OK } else { EXIT_CONFIG }
    };
    let cli = Cli::try_parse_from(args).map_err(|e| report(e, out, err))?;
    let Some(config) = config_path(&cli.command).cloned() else {
        return Ok(cli);
    };
    let sub = args[1].to_string_lossy().into_owned();
    let merged = merge_config(args, &sub, &config).map_err(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_CONFIG
    })?;
    Cli::try_parse_from(&merged).map_err(|e| report(e, out, err))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidObjective(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&args, out, err) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Score(a) => cmd_score(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let out_dir = required(&a.out_dir, "out-dir")?;
    let spec = SynthSpec {
        num_normal: a.num_normal,
        num_abnormal: a.num_abnormal,
        test_normal: a.test_normal,
        test_abnormal: a.test_abnormal,
        dim: required(&a.dim, "dim")?,
        min_clips: a.min_clips,
        max_clips: a.max_clips,
        separability: a.separability,
        anomaly_fraction: a.anomaly_fraction,
        noise_sigma: a.noise_sigma,
        segments: a.segments,
        seed: a.seed,
    };
    spec.validate()?;
    let g = generate(&spec, &out_dir)?;
    writeln!(out, "{}", g.train_manifest.display()).map_err(io_out)?;
    writeln!(out, "{}", g.test_manifest.display()).map_err(io_out)?;
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let manifest_path = required(&a.train_manifest, "train-manifest")?;
    let out_dir = required(&a.out_dir, "out-dir")?;
    let config = a.train.to_config(a.optimizer, a.lr)?;
    let manifest = DatasetManifest::read(&manifest_path, Split::Train)?;
    let (_, log) = trainer::train(&manifest, &config, &out_dir, a.resume)?;
    let outputs = trainer::TrainOutputs::in_dir(&out_dir);
    writeln!(out, "checkpoint={}", outputs.checkpoint.display()).map_err(io_out)?;
    writeln!(out, "loss_log={}", outputs.loss_csv.display()).map_err(io_out)?;
    if let Some(last) = log.records.last() {
        writeln!(out, "final_loss={:.6}", last.total).map_err(io_out)?;
    }
    Ok(())
}

fn write_eval_outputs(out_dir: &Path, roc: &eval::RocResult, videos: &[eval::FrameScores]) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let roc_path = out_dir.join(ROC_FILE);
    fs::write(&roc_path, eval::roc_csv(roc)).map_err(|e| Error::io(&roc_path, e))?;
    let scores_path = out_dir.join(FRAME_SCORES_FILE);
    fs::write(&scores_path, eval::frame_scores_csv(videos)).map_err(|e| Error::io(&scores_path, e))
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let manifest_path = required(&a.test_manifest, "test-manifest")?;
    let out_dir = required(&a.out_dir, "out-dir")?;
    let manifest = DatasetManifest::read(&manifest_path, Split::Test)?;
    let model;
    let scorer: &dyn BagScorer = match a.reference.as_deref() {
        Some("truth") => &TruthScorer,
        Some("constant") => &ConstantScorer(0.5),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown reference {other:?} (expected truth or constant)"
            )))
        }
        None => {
            model = ScoringNetwork::load(required(&a.checkpoint, "checkpoint")?)?;
            &model
        }
    };
    let (roc, videos) = eval::evaluate(scorer, &manifest, a.stream, a.segments)?;
    write_eval_outputs(&out_dir, &roc, &videos)?;
    writeln!(out, "auc={:.6}", roc.auc).map_err(io_out)?;
    Ok(())
}

pub fn cmd_score(a: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let net = ScoringNetwork::load(required(&a.checkpoint, "checkpoint")?)?;
    let features = load_features(&required(&a.features, "features")?, a.stream)?;
    let segments = segmentize(&features, a.segments)?;
    let scores = net.score(segments.view())?;
    for s in &scores {
        writeln!(out, "{s:.6}").map_err(io_out)?;
    }
    let (max, idx) = crate::objective::bag_max(scores.as_slice().unwrap())?;
    writeln!(out, "max={max:.6} segment={idx}").map_err(io_out)?;
    Ok(())
}

/// One row of the sweep report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub auc: f64,
    pub final_loss: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("optimizer,lr,auc,final_loss\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6},{:.6}\n", r.optimizer, r.lr, r.auc, r.final_loss));
    }
    s
}

/// Trains and evaluates every grid cell from the same seed; rows sorted by
/// AUC, best first (grid order among ties).
pub fn run_sweep(
    train_manifest: &DatasetManifest,
    test_manifest: &DatasetManifest,
    flags: &TrainFlags,
    out_dir: &Path,
) -> Result<Vec<SweepRow>> {
    let test_bags = test_manifest
        .entries
        .iter()
        .map(|e: &ManifestEntry| build_bag(test_manifest, e, flags.stream, flags.segments))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = sweep_grid()
        .into_par_iter()
        .map(|(kind, lr)| {
            let config = flags.to_config(kind, lr)?;
            let cell_dir = out_dir.join(format!("{kind}_{lr}"));
            let (_, log) = trainer::train(train_manifest, &config, &cell_dir, false)?;
            let model = ScoringNetwork::load(cell_dir.join(trainer::CHECKPOINT_FILE))?;
            let (roc, _) = eval::evaluate_bags(&model, &test_bags)?;
            let final_loss = log.records.last().map_or(f64::NAN, |r| r.total);
            Ok(SweepRow {
                optimizer: kind,
                lr,
                auc: roc.auc,
                final_loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.auc.total_cmp(&a.auc));
    Ok(rows)
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let train_path = required(&a.train_manifest, "train-manifest")?;
    let test_path = required(&a.test_manifest, "test-manifest")?;
    let out_dir = required(&a.out_dir, "out-dir")?;
    // surface flag errors before any training starts
    a.train.to_config(OptimizerKind::Adagrad, 0.001)?;
    let train_manifest = DatasetManifest::read(&train_path, Split::Train)?;
    let test_manifest = DatasetManifest::read(&test_path, Split::Test)?;
    let rows = run_sweep(&train_manifest, &test_manifest, &a.train, &out_dir)?;
    let csv = sweep_csv(&rows);
    let path = out_dir.join(SWEEP_FILE);
    fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    write!(out, "{csv}").map_err(io_out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["milvad"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# comment\nbatch_pairs = 20\n\nlr=0.01 # trailing\n").unwrap();
        assert_eq!(m["batch-pairs"], "20");
        assert_eq!(m["lr"], "0.01");
        assert!(parse_config_file("no equals sign").is_err());
    }

    #[test]
    fn help_lists_defaults() {
        for sub in ["gen", "train", "eval", "score", "sweep"] {
            let (code, out, _) = run_capture(&[sub, "--help"]);
            assert_eq!(code, 0);
            assert!(out.contains("--config"), "{sub}");
        }
        let (_, out, _) = run_capture(&["train", "--help"]);
        for needle in [
            "[default: 32]",
            "[default: 30]",
            "[default: adagrad]",
            "[default: 0.001]",
            "[default: 0.00008]",
            "[default: 1]",
            "[default: 0.6]",
            "[default: 3000]",
            "[default: fused]",
            "[default: 0]",
        ] {
            assert!(out.contains(needle), "missing {needle} in\n{out}");
        }
    }

    #[test]
    fn missing_dim_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run_capture(&["gen", "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("dim"));
    }

    #[test]
    fn unknown_flag_and_key_are_config_errors() {
        assert_eq!(run_capture(&["train", "--bogus", "1"]).0, EXIT_CONFIG);
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "dim = 4\nwhatever = 1\n").unwrap();
        let (code, _, err) = run_capture(&["gen", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("whatever"));
    }

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "iterations = 7\nlr = 0.01\nstream = rgb\n").unwrap();
        let argv = ["milvad", "train", "--config", cfg.to_str().unwrap(), "--lr", "0.5"];
        let args: Vec<OsString> = argv.iter().map(OsString::from).collect();
        let cli = parse(&args, &mut Vec::new(), &mut Vec::new()).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.lr, 0.5);
        assert_eq!(t.train.iterations, 7);
        assert_eq!(t.train.stream, Stream::Rgb);
        assert_eq!(t.train.batch_pairs, 30);
        assert_eq!(t.optimizer, OptimizerKind::Adagrad);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        assert_eq!(run_capture(&["gen", "--out-dir", d, "--dim", "x"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["gen", "--out-dir", d, "--dim", "4", "--noise-sigma", "0"]).0, EXIT_CONFIG);
        assert_eq!(
            run_capture(&["train", "--train-manifest", "m.csv", "--out-dir", d, "--margin", "0"]).0,
            EXIT_CONFIG
        );
    }

    #[test]
    fn sweep_csv_format() {
        let rows = vec![SweepRow {
            optimizer: OptimizerKind::Adagrad,
            lr: 0.001,
            auc: 0.9,
            final_loss: 0.25,
        }];
        assert_eq!(sweep_csv(&rows), "optimizer,lr,auc,final_loss\nadagrad,0.001,0.900000,0.250000\n");
    }
}
