//! Training loop: sample abnormal/normal bag pairs, score both bags in
//! training mode, evaluate the ranking objective, backpropagate the score
//! subgradients through the network and take one optimizer step.
//!
//! Every iteration draws its randomness (batch sampling, then dropout masks
//! in pair order) from a ChaCha stream keyed by `(seed, iteration)`, so a run
//! is bitwise reproducible and can resume mid-way from a state file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::features::{load_bags, Bag, DatasetManifest, Label, Stream};
use crate::objective::{batch_loss, ObjectiveConfig};
use crate::optim::{OptimizerKind, OptimizerState, DEFAULT_LEARNING_RATE};
use crate::scorer::{DropoutMasks, Mode, ParameterGradients, Params, ScoringNetwork, DEFAULT_DROPOUT};
use crate::{Error, Result, DEFAULT_SEGMENTS};

pub const DEFAULT_BATCH_PAIRS: usize = 30;
pub const DEFAULT_ITERATIONS: usize = 3000;
pub const DEFAULT_CHECKPOINT_EVERY: usize = 500;

pub const CHECKPOINT_FILE: &str = "model.vmc";
pub const LOSS_FILE: &str = "loss.csv";
pub const STATE_FILE: &str = "train.state";
pub const LOSS_HEADER: &str = "iteration,total,hinge,sparsity,smoothness,ms";

const STATE_MAGIC: &[u8; 4] = b"VMS1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Abnormal/normal pairs per batch.
    pub batch_pairs: usize,
    pub iterations: usize,
    pub seed: u64,
    pub objective: ObjectiveConfig,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub checkpoint_every: usize,
    pub stream: Stream,
    pub segments: usize,
    /// L2 penalty on weight matrices, added to their gradients.
    pub weight_decay: f64,
    /// Record per-iteration wall time; when off the `ms` column is 0.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_pairs: DEFAULT_BATCH_PAIRS,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            objective: ObjectiveConfig::default(),
            optimizer: OptimizerKind::Adagrad,
            learning_rate: DEFAULT_LEARNING_RATE,
            dropout_rate: DEFAULT_DROPOUT,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            stream: Stream::Fused,
            segments: DEFAULT_SEGMENTS,
            weight_decay: 0.0,
            record_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_pairs == 0 {
            return bad("batch_pairs must be >= 1".into());
        }
        if self.segments == 0 {
            return bad("segments must be >= 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be > 0", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight decay {} must be >= 0", self.weight_decay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// 1-based count of completed iterations.
    pub iteration: usize,
    pub total: f64,
    pub hinge: f64,
    pub sparsity: f64,
    pub smoothness: f64,
    pub ms: f64,
}

impl TrainRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.iteration, self.total, self.hinge, self.sparsity, self.smoothness, self.ms
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOSS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Draws `batch_pairs` abnormal and `batch_pairs` normal bags, each without
/// replacement, and pairs them by draw order.
pub fn sample_batch<'a, R: Rng + ?Sized>(
    bags: &'a [Bag],
    batch_pairs: usize,
    rng: &mut R,
) -> Result<Vec<(&'a Bag, &'a Bag)>> {
    let abnormal: Vec<&Bag> = bags.iter().filter(|b| b.label == Label::Abnormal).collect();
    let normal: Vec<&Bag> = bags.iter().filter(|b| b.label == Label::Normal).collect();
    for (label, pool) in [(Label::Abnormal, &abnormal), (Label::Normal, &normal)] {
        if pool.len() < batch_pairs {
            return Err(Error::InsufficientBags {
                label: label.name(),
                needed: batch_pairs,
                available: pool.len(),
            });
        }
    }
    let picks_a = index::sample(rng, abnormal.len(), batch_pairs);
    let picks_n = index::sample(rng, normal.len(), batch_pairs);
    Ok(picks_a
        .iter()
        .zip(picks_n.iter())
        .map(|(a, n)| (abnormal[a], normal[n]))
        .collect())
}

fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 is reserved for weight initialisation
    rng.set_stream(iteration as u64 + 1);
    rng
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Network, optimizer state and iteration counter of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainConfig,
    pub network: ScoringNetwork,
    pub optimizer: OptimizerState,
    /// Completed iterations.
    pub iteration: usize,
}

impl Trainer {
    pub fn new(dim: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let network = ScoringNetwork::init(dim, config.dropout_rate, config.seed)?;
        Ok(Self::with_network(network, config))
    }

    /// Starts from an existing network (e.g. hand-set weights in tests).
    pub fn with_network(network: ScoringNetwork, config: TrainConfig) -> Self {
        let optimizer = OptimizerState::new(config.optimizer, config.learning_rate);
        Self {
            config,
            network,
            optimizer,
            iteration: 0,
        }
    }

    /// Loss and gradients of one sampled batch, without updating anything.
    pub fn batch_gradients(&self, bags: &[Bag], rng: &mut ChaCha8Rng) -> Result<(TrainRecord, ParameterGradients)> {
        let net = &self.network;
        let pairs = sample_batch(bags, self.config.batch_pairs, rng)?;
        let masks: Vec<(DropoutMasks, DropoutMasks)> = pairs
            .iter()
            .map(|_| (DropoutMasks::sample(net, rng), DropoutMasks::sample(net, rng)))
            .collect();

        let forwards = pairs
            .par_iter()
            .zip(masks.par_iter())
            .map(|((a, n), (ma, mn))| {
                let fa = net.forward_bag(a.segments.view(), Mode::Train(ma))?;
                let fnn = net.forward_bag(n.segments.view(), Mode::Train(mn))?;
                Ok((fa, fnn))
            })
            .collect::<Result<Vec<_>>>()?;

        let scores: Vec<(Vec<f64>, Vec<f64>)> = forwards
            .iter()
            .map(|((sa, _), (sn, _))| (sa.to_vec(), sn.to_vec()))
            .collect();
        let loss = batch_loss(&scores, &self.config.objective)?;

        let per_pair = forwards
            .par_iter()
            .zip(loss.pairs.par_iter())
            .map(|(((_, ta), (_, tn)), pl)| {
                let mut g = net.backward(ta, &pl.grad_pos)?;
                g.add_assign(&net.backward(tn, &pl.grad_neg)?);
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        // fixed reduction order
        let mut grads = net.zeros_like();
        for g in &per_pair {
            grads.add_assign(g);
        }

        let wd = self.config.weight_decay;
        if wd > 0.0 {
            let p = &net.params;
            grads.w1.scaled_add(wd, &p.w1);
            grads.w2.scaled_add(wd, &p.w2);
            grads.w3.scaled_add(wd, &p.w3);
        }

        let record = TrainRecord {
            iteration: self.iteration + 1,
            total: loss.total,
            hinge: loss.hinge,
            sparsity: loss.sparsity,
            smoothness: loss.smoothness,
            ms: 0.0,
        };
        Ok((record, grads))
    }

    /// Runs one iteration.
    pub fn step(&mut self, bags: &[Bag]) -> Result<TrainRecord> {
        let start = Instant::now();
        let mut rng = iteration_rng(self.config.seed, self.iteration);
        let (mut record, grads) = self.batch_gradients(bags, &mut rng)?;
        if !record.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: record.iteration,
                total: record.total,
            });
        }
        let grad_tensors = grads.tensors();
        let mut params = self.network.params.tensors_mut();
        self.optimizer.step(&mut params, &grad_tensors)?;
        self.network.params.check_finite()?;
        self.iteration += 1;
        if self.config.record_time {
            record.ms = start.elapsed().as_secs_f64() * 1e3;
        }
        Ok(record)
    }

    /// Runs until `config.iterations` iterations are complete, calling
    /// `on_record` after each one.
    pub fn run<F>(&mut self, bags: &[Bag], mut on_record: F) -> Result<TrainLog>
    where
        F: FnMut(&Trainer, &TrainRecord) -> Result<()>,
    {
        check_bags(bags, self.network.dim())?;
        let mut log = TrainLog::default();
        while self.iteration < self.config.iterations {
            let record = self.step(bags)?;
            on_record(self, &record)?;
            log.records.push(record);
        }
        Ok(log)
    }

    /// Serialises network, optimizer state and progress for resuming.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(STATE_MAGIC);
        w.u64(self.iteration as u64);
        w.u64(self.config.seed);
        let (h1, h2) = self.network.params.hidden();
        w.u64(self.network.dim() as u64);
        w.u64(h1 as u64);
        w.u64(h2 as u64);
        w.f64(self.network.dropout_rate);
        for t in self.network.params.tensors() {
            t.iter().for_each(|&v| w.f64(v));
        }
        let o = &self.optimizer;
        w.u64(match o.kind {
            OptimizerKind::Adagrad => 0,
            OptimizerKind::Adam => 1,
        });
        for v in [o.learning_rate, o.epsilon, o.beta1, o.beta2] {
            w.f64(v);
        }
        w.u64(o.step_count);
        for buffers in [&o.first, &o.second] {
            w.u64(buffers.len() as u64);
            for b in buffers.iter() {
                w.u64(b.len() as u64);
                b.iter().for_each(|&v| w.f64(v));
            }
        }
        w.0
    }

    /// Restores a trainer from [`Trainer::state_bytes`] output. The stored
    /// seed and optimizer replace the ones in `config`.
    pub fn from_state_bytes(bytes: &[u8], mut config: TrainConfig, path: &Path) -> Result<Self> {
        let bad = |message: &str| Error::Checkpoint {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let mut r = ByteReader { bytes, at: 0 };
        if r.take(4).ok_or_else(|| bad("truncated"))? != STATE_MAGIC {
            return Err(bad("missing VMS1 header"));
        }
        let mut read = || -> Option<Self> {
            let iteration = r.u64()? as usize;
            config.seed = r.u64()?;
            let dim = r.u64()? as usize;
            let h1 = r.u64()? as usize;
            let h2 = r.u64()? as usize;
            let dropout = r.f64()?;
            let mut params = Params::zeros(dim, h1, h2);
            for t in params.tensors_mut() {
                for v in t.iter_mut() {
                    *v = r.f64()?;
                }
            }
            let kind = match r.u64()? {
                0 => OptimizerKind::Adagrad,
                1 => OptimizerKind::Adam,
                _ => return None,
            };
            let mut optimizer = OptimizerState::new(kind, r.f64()?);
            optimizer.epsilon = r.f64()?;
            optimizer.beta1 = r.f64()?;
            optimizer.beta2 = r.f64()?;
            optimizer.step_count = r.u64()?;
            for slot in [&mut optimizer.first, &mut optimizer.second] {
                let n = r.u64()? as usize;
                for _ in 0..n {
                    let len = r.u64()? as usize;
                    slot.push((0..len).map(|_| r.f64()).collect::<Option<Vec<_>>>()?);
                }
            }
            config.optimizer = kind;
            config.learning_rate = optimizer.learning_rate;
            config.dropout_rate = dropout;
            let mut network = ScoringNetwork::from_params(params, dropout);
            network.seed = config.seed;
            Some(Self {
                config: config.clone(),
                network,
                optimizer,
                iteration,
            })
        };
        let trainer = read().ok_or_else(|| bad("truncated or corrupt state"))?;
        if r.at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        trainer.network.params.check_finite()?;
        Ok(trainer)
    }
}

fn check_bags(bags: &[Bag], dim: usize) -> Result<()> {
    for b in bags {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            });
        }
    }
    Ok(())
}

/// Trains on in-memory bags from a fresh initialisation.
pub fn train_bags(bags: &[Bag], config: &TrainConfig) -> Result<(ScoringNetwork, TrainLog)> {
    let dim = bags.first().map(Bag::dim).ok_or(Error::InsufficientBags {
        label: "any",
        needed: 1,
        available: 0,
    })?;
    let mut trainer = Trainer::new(dim, config.clone())?;
    let log = trainer.run(bags, |_, _| Ok(()))?;
    Ok((trainer.network, log))
}

/// Files produced by [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub state: PathBuf,
}

impl TrainOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            checkpoint: dir.join(CHECKPOINT_FILE),
            loss_csv: dir.join(LOSS_FILE),
            state: dir.join(STATE_FILE),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Trains from a training manifest, writing the checkpoint, the resume state
/// and the loss log into `out_dir`.
///
/// The checkpoint and state are rewritten every `checkpoint_every`
/// iterations and once more at the end. With `resume`, training continues
/// from `out_dir`'s state file and appends to its loss log.
pub fn train(
    manifest: &DatasetManifest,
    config: &TrainConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<(ScoringNetwork, TrainLog)> {
    config.validate()?;
    let bags = load_bags(manifest, config.stream, config.segments)?;
    let dim = bags.first().map(Bag::dim).ok_or(Error::InsufficientBags {
        label: "any",
        needed: 1,
        available: 0,
    })?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outputs = TrainOutputs::in_dir(out_dir);

    let mut trainer = if resume {
        let bytes = fs::read(&outputs.state).map_err(|e| Error::io(&outputs.state, e))?;
        let mut t = Trainer::from_state_bytes(&bytes, config.clone(), &outputs.state)?;
        t.config.iterations = config.iterations;
        t.config.checkpoint_every = config.checkpoint_every;
        t.config.record_time = config.record_time;
        t
    } else {
        Trainer::new(dim, config.clone())?
    };

    let loss_file = if resume {
        fs::OpenOptions::new().append(true).open(&outputs.loss_csv)
    } else {
        File::create(&outputs.loss_csv).and_then(|mut f| writeln!(f, "{LOSS_HEADER}").map(|_| f))
    }
    .map_err(|e| Error::io(&outputs.loss_csv, e))?;
    let mut loss_out = BufWriter::new(loss_file);

    let every = config.checkpoint_every;
    let log = trainer.run(&bags, |t, record| {
        writeln!(loss_out, "{}", record.csv_line()).map_err(|e| Error::io(&outputs.loss_csv, e))?;
        if t.iteration % every == 0 {
            t.network.save(&outputs.checkpoint)?;
            write_file(&outputs.state, &t.state_bytes())?;
        }
        Ok(())
    })?;
    loss_out.flush().map_err(|e| Error::io(&outputs.loss_csv, e))?;
    trainer.network.save(&outputs.checkpoint)?;
    write_file(&outputs.state, &trainer.state_bytes())?;
    Ok((trainer.network, log))
}

#[derive(Default)]
struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl ByteReader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let out = self.bytes.get(self.at..self.at + n)?;
        self.at += n;
        Some(out)
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn bag(id: usize, label: Label, value: f64, dim: usize) -> Bag {
        Bag {
            video_id: format!("v{id}"),
            label,
            segments: Array2::from_shape_fn((4, dim), |(i, j)| value + 0.01 * (i + j) as f64),
            num_frames: 64,
            anomaly_spans: Vec::new(),
        }
    }

    fn dataset(n_abnormal: usize, n_normal: usize, dim: usize) -> Vec<Bag> {
        let mut bags: Vec<Bag> = (0..n_abnormal).map(|i| bag(i, Label::Abnormal, 1.0, dim)).collect();
        bags.extend((0..n_normal).map(|i| bag(100 + i, Label::Normal, -1.0, dim)));
        bags
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            batch_pairs: 3,
            iterations: 5,
            segments: 4,
            record_time: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn exhaustive_sample_uses_every_bag_once() {
        let bags = dataset(30, 30, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_batch(&bags, 30, &mut rng).unwrap();
        let mut ids: Vec<&str> = batch
            .iter()
            .flat_map(|(a, n)| {
                assert_eq!((a.label, n.label), (Label::Abnormal, Label::Normal));
                [a.video_id.as_str(), n.video_id.as_str()]
            })
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 60);
    }

    #[test]
    fn sampling_is_seeded() {
        let bags = dataset(10, 12, 2);
        let ids = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_batch(&bags, 5, &mut rng)
                .unwrap()
                .iter()
                .map(|(a, n)| (a.video_id.clone(), n.video_id.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(7), ids(7));
        assert_ne!(ids(7), ids(8));
    }

    #[test]
    fn too_few_bags_is_an_error() {
        let bags = dataset(30, 40, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_batch(&bags, 31, &mut rng),
            Err(Error::InsufficientBags { label: "abnormal", needed: 31, available: 30 })
        ));
    }

    #[test]
    fn zero_iterations_returns_initial_network() {
        let bags = dataset(4, 4, 3);
        let cfg = TrainConfig { iterations: 0, ..small_config() };
        let (net, log) = train_bags(&bags, &cfg).unwrap();
        assert!(log.is_empty());
        assert_eq!(net, ScoringNetwork::init(3, cfg.dropout_rate, cfg.seed).unwrap());
    }

    #[test]
    fn zero_network_has_unit_loss() {
        let bags = dataset(4, 4, 3);
        let cfg = TrainConfig {
            objective: ObjectiveConfig::new(1.0, 0.0, 0.0).unwrap(),
            ..small_config()
        };
        let net = ScoringNetwork::from_params(Params::zeros(3, 512, 32), cfg.dropout_rate);
        let trainer = Trainer::with_network(net, cfg);
        let mut rng = iteration_rng(0, 0);
        let (record, grads) = trainer.batch_gradients(&bags, &mut rng).unwrap();
        assert_eq!(record.total, 1.0);
        // all hidden units are dead at zero weights, only the output bias moves
        assert!(grads.w1.iter().chain(&grads.w2).chain(&grads.w3).all(|&g| g == 0.0));
        assert_eq!(grads.b3[0], 0.0);
    }

    #[test]
    fn inactive_hinge_leaves_parameters_unchanged() {
        let bags = dataset(4, 4, 3);
        let cfg = TrainConfig {
            objective: ObjectiveConfig::new(1e-9, 0.0, 0.0).unwrap(),
            dropout_rate: 0.0,
            ..small_config()
        };
        // abnormal features are positive, normal negative: a unit on the
        // feature sum separates them by far more than the margin
        let mut p = Params::zeros(3, 512, 32);
        p.w1.row_mut(0).fill(10.0);
        p.w2[[0, 0]] = 10.0;
        p.w3[[0, 0]] = 10.0;
        let net = ScoringNetwork::from_params(p, 0.0);
        let mut trainer = Trainer::with_network(net.clone(), cfg);
        let record = trainer.step(&bags).unwrap();
        assert_eq!(record.hinge, 0.0);
        assert_eq!(trainer.network, net);
    }

    #[test]
    fn log_is_complete_and_consistent() {
        let bags = dataset(4, 4, 3);
        let (_, log) = train_bags(&bags, &small_config()).unwrap();
        assert_eq!(log.len(), 5);
        for (i, r) in log.records.iter().enumerate() {
            assert_eq!(r.iteration, i + 1);
            assert!((r.total - (r.hinge + r.sparsity + r.smoothness)).abs() < 1e-9);
            assert_eq!(r.ms, 0.0);
        }
        let csv = log.to_csv();
        assert!(csv.starts_with("iteration,total,hinge,sparsity,smoothness,ms\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn training_is_reproducible() {
        let bags = dataset(5, 5, 3);
        let a = train_bags(&bags, &small_config()).unwrap();
        let b = train_bags(&bags, &small_config()).unwrap();
        assert_eq!(a.0.checkpoint_bytes().unwrap(), b.0.checkpoint_bytes().unwrap());
        assert_eq!(a.1.to_csv(), b.1.to_csv());
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let bags = dataset(5, 5, 3);
        for optimizer in [OptimizerKind::Adagrad, OptimizerKind::Adam] {
            let cfg = TrainConfig { iterations: 6, optimizer, ..small_config() };
            let mut full = Trainer::new(3, cfg.clone()).unwrap();
            let full_log = full.run(&bags, |_, _| Ok(())).unwrap();

            let mut first = Trainer::new(3, TrainConfig { iterations: 2, ..cfg.clone() }).unwrap();
            let mut log = first.run(&bags, |_, _| Ok(())).unwrap();
            let mut resumed = Trainer::from_state_bytes(&first.state_bytes(), cfg.clone(), Path::new("s")).unwrap();
            log.records.extend(resumed.run(&bags, |_, _| Ok(())).unwrap().records);

            assert_eq!(resumed, full);
            assert_eq!(log, full_log);
        }
    }

    #[test]
    fn corrupt_state_is_rejected() {
        let t = Trainer::new(3, small_config()).unwrap();
        let bytes = t.state_bytes();
        assert!(Trainer::from_state_bytes(&bytes[..bytes.len() - 3], small_config(), Path::new("s")).is_err());
        assert!(Trainer::from_state_bytes(b"XXXX", small_config(), Path::new("s")).is_err());
    }

    #[test]
    fn non_finite_loss_reports_iteration() {
        let bags = dataset(4, 4, 3);
        let cfg = TrainConfig {
            objective: ObjectiveConfig { margin: 1.0, lambda1: f64::MAX, lambda2: 0.0 },
            ..small_config()
        };
        let mut trainer = Trainer::with_network(ScoringNetwork::init(3, 0.6, 0).unwrap(), cfg.clone());
        trainer.config.objective.lambda1 = f64::MAX;
        // validation rejects nothing here (lambda is finite) but the sum overflows
        match trainer.step(&bags) {
            Err(Error::NonFiniteLoss { iteration: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn median_handles_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
