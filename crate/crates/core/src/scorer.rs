//! The segment scoring network: `D -> 512 -> 32 -> 1`, ReLU on both hidden
//! layers, sigmoid on the output, inverted dropout after each hidden
//! activation at training time.
//!
//! Forward passes run over a whole bag (`N x D`) at once. In training mode one
//! dropout mask per hidden layer is shared by every segment of the bag, so the
//! bag maximum and its subgradient see the same sub-network.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const HIDDEN1: usize = 512;
pub const HIDDEN2: usize = 32;
pub const DEFAULT_DROPOUT: f64 = 0.6;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VMC1";

// keeps scores strictly inside (0, 1) when the logit saturates f64
const SCORE_FLOOR: f64 = 1e-15;

const TENSOR_NAMES: [&str; 6] = ["w1", "b1", "w2", "b2", "w3", "b3"];

/// Weights and biases of the three layers. Also used for their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

pub type ParameterGradients = Params;

impl Params {
    pub fn zeros(dim: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden1, dim)),
            b1: Array1::zeros(hidden1),
            w2: Array2::zeros((hidden2, hidden1)),
            b2: Array1::zeros(hidden2),
            w3: Array2::zeros((1, hidden2)),
            b3: Array1::zeros(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> (usize, usize) {
        (self.w1.nrows(), self.w2.nrows())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat views of the six tensors in layer order `w1 b1 w2 b2 w3 b3`.
    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
            self.w3.as_slice().unwrap(),
            self.b3.as_slice().unwrap(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            self.b3.as_slice_mut().unwrap(),
        ]
    }

    pub fn tensor_names() -> [&'static str; 6] {
        TENSOR_NAMES
    }

    /// Row-major storage for every tensor; `tensors` relies on it.
    pub fn into_standard_layout(self) -> Self {
        let c2 = |a: Array2<f64>| if a.is_standard_layout() { a } else { a.as_standard_layout().into_owned() };
        Self {
            w1: c2(self.w1),
            b1: self.b1,
            w2: c2(self.w2),
            b2: self.b2,
            w3: c2(self.w3),
            b3: self.b3,
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in TENSOR_NAMES.iter().zip(self.tensors()) {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteParameter(name));
            }
        }
        Ok(())
    }

    fn same_shape(&self, other: &Params) -> bool {
        self.w1.dim() == other.w1.dim() && self.w2.dim() == other.w2.dim()
    }
}

/// Per-layer inverted-dropout masks; entries are `0` or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub hidden1: Array1<f64>,
    pub hidden2: Array1<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(net: &ScoringNetwork, rng: &mut R) -> Self {
        let (h1, h2) = net.params.hidden();
        let p = net.dropout_rate;
        let keep = 1.0 / (1.0 - p);
        let mut draw = |n: usize| {
            Array1::from_shape_fn(n, |_| if rng.random::<f64>() < p { 0.0 } else { keep })
        };
        let hidden1 = draw(h1);
        let hidden2 = draw(h2);
        Self { hidden1, hidden2 }
    }

    pub fn ones(net: &ScoringNetwork) -> Self {
        let (h1, h2) = net.params.hidden();
        Self {
            hidden1: Array1::ones(h1),
            hidden2: Array1::ones(h2),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// Deterministic, no dropout.
    Eval,
    /// Dropout with the given masks.
    Train(&'a DropoutMasks),
}

/// Activations cached by a forward pass for use in [`ScoringNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Array2<f64>,
    pub pre1: Array2<f64>,
    pub act1: Array2<f64>,
    pub pre2: Array2<f64>,
    pub act2: Array2<f64>,
    pub scores: Array1<f64>,
    pub masks: Option<DropoutMasks>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringNetwork {
    pub params: Params,
    pub dropout_rate: f64,
    pub seed: u64,
}

pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR)
}

/// Glorot-uniform half-width for a layer.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl ScoringNetwork {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(dim: usize, dropout_rate: f64, seed: u64) -> Result<Self> {
        Self::init_with_hidden(dim, HIDDEN1, HIDDEN2, dropout_rate, seed)
    }

    pub fn init_with_hidden(
        dim: usize,
        hidden1: usize,
        hidden2: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || hidden1 == 0 || hidden2 == 0 {
            return Err(Error::InvalidShape("layer widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let b = glorot_bound(cols, rows);
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-b..=b))
        };
        let w1 = glorot(hidden1, dim);
        let w2 = glorot(hidden2, hidden1);
        let w3 = glorot(1, hidden2);
        let params = Params {
            w1,
            b1: Array1::zeros(hidden1),
            w2,
            b2: Array1::zeros(hidden2),
            w3,
            b3: Array1::zeros(1),
        };
        Ok(Self {
            params,
            dropout_rate,
            seed,
        })
    }

    pub fn from_params(params: Params, dropout_rate: f64) -> Self {
        Self {
            params: params.into_standard_layout(),
            dropout_rate,
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Scores every row of `segments`.
    pub fn forward_bag(&self, segments: ArrayView2<'_, f64>, mode: Mode<'_>) -> Result<(Array1<f64>, ForwardTrace)> {
        if segments.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: segments.ncols(),
            });
        }
        let p = &self.params;
        let masks = match mode {
            Mode::Eval => None,
            Mode::Train(m) => {
                let (h1, h2) = p.hidden();
                if m.hidden1.len() != h1 || m.hidden2.len() != h2 {
                    return Err(Error::TraceMismatch("dropout mask widths".into()));
                }
                Some(m.clone())
            }
        };

        let pre1 = segments.dot(&p.w1.t()) + &p.b1;
        let mut act1 = pre1.mapv(|v| v.max(0.0));
        if let Some(m) = &masks {
            act1 *= &m.hidden1;
        }
        let pre2 = act1.dot(&p.w2.t()) + &p.b2;
        let mut act2 = pre2.mapv(|v| v.max(0.0));
        if let Some(m) = &masks {
            act2 *= &m.hidden2;
        }
        let logits = act2.dot(&p.w3.row(0)) + p.b3[0];
        let scores = logits.mapv(sigmoid);

        let trace = ForwardTrace {
            input: segments.to_owned(),
            pre1,
            act1,
            pre2,
            act2,
            scores: scores.clone(),
            masks,
        };
        Ok((scores, trace))
    }

    /// Scores a single segment.
    pub fn forward(&self, segment: ArrayView1<'_, f64>, mode: Mode<'_>) -> Result<(f64, ForwardTrace)> {
        let rows = segment.insert_axis(Axis(0));
        let (scores, trace) = self.forward_bag(rows, mode)?;
        Ok((scores[0], trace))
    }

    /// Eval-mode scores for a bag.
    pub fn score(&self, segments: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward_bag(segments, Mode::Eval)?.0)
    }

    /// Gradients of `sum_i d_scores[i] * score_i` with respect to every
    /// parameter, reusing the dropout masks recorded in `trace`.
    pub fn backward(&self, trace: &ForwardTrace, d_scores: &[f64]) -> Result<ParameterGradients> {
        let p = &self.params;
        let (h1, h2) = p.hidden();
        let n = trace.scores.len();
        if d_scores.len() != n {
            return Err(Error::TraceMismatch(format!(
                "{} score gradients for {} traced segments",
                d_scores.len(),
                n
            )));
        }
        if trace.input.ncols() != p.dim() || trace.pre1.ncols() != h1 || trace.pre2.ncols() != h2 {
            return Err(Error::TraceMismatch("layer widths differ from network".into()));
        }

        // d score / d logit = s (1 - s)
        let d_logit = Array1::from_shape_fn(n, |i| {
            let s = trace.scores[i];
            d_scores[i] * s * (1.0 - s)
        });
        let w3 = d_logit.view().insert_axis(Axis(1)).t().dot(&trace.act2);
        let b3 = Array1::from_elem(1, d_logit.sum());

        let mut d_pre2 = d_logit.view().insert_axis(Axis(1)).dot(&p.w3);
        if let Some(m) = &trace.masks {
            d_pre2 *= &m.hidden2;
        }
        Zip::from(&mut d_pre2).and(&trace.pre2).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let w2 = d_pre2.t().dot(&trace.act1);
        let b2 = d_pre2.sum_axis(Axis(0));

        let mut d_pre1 = d_pre2.dot(&p.w2);
        if let Some(m) = &trace.masks {
            d_pre1 *= &m.hidden1;
        }
        Zip::from(&mut d_pre1).and(&trace.pre1).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = d_pre1.t().dot(&trace.input);
        let b1 = d_pre1.sum_axis(Axis(0));

        Ok(Params { w1, b1, w2, b2, w3, b3 }.into_standard_layout())
    }

    pub fn zeros_like(&self) -> ParameterGradients {
        let (h1, h2) = self.params.hidden();
        Params::zeros(self.dim(), h1, h2)
    }

    pub fn check_gradients_shape(&self, grads: &ParameterGradients) -> bool {
        self.params.same_shape(grads)
    }

    /// Encodes the network in the `VMC1` checkpoint format (f32 parameters).
    pub fn checkpoint_bytes(&self) -> Result<Vec<u8>> {
        if self.params.hidden() != (HIDDEN1, HIDDEN2) {
            return Err(Error::Checkpoint {
                path: Default::default(),
                message: format!(
                    "checkpoints hold {HIDDEN1}/{HIDDEN2} hidden units, network has {:?}",
                    self.params.hidden()
                ),
            });
        }
        let mut out = Vec::with_capacity(12 + 4 * self.params.num_parameters());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dropout_rate as f32).to_le_bytes());
        for t in self.params.tensors() {
            for &v in t {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing VMC1 header".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dropout = f32::from_le_bytes(bytes[8..12].try_into().unwrap()) as f64;
        if dim == 0 {
            return Err(bad("dimension is zero".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(bad(format!("dropout rate {dropout} outside [0, 1)")));
        }
        let mut params = Params::zeros(dim, HIDDEN1, HIDDEN2);
        let expected = 12 + 4 * params.num_parameters();
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut values = bytes[12..]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = values.next().unwrap();
            }
        }
        params.check_finite()?;
        Ok(Self::from_params(params, dropout))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.checkpoint_bytes().map_err(|e| match e {
            Error::Checkpoint { message, .. } => Error::Checkpoint {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes, path)
    }
}
