//! Weakly-supervised video anomaly scoring.
//!
//! Videos arrive as precomputed per-clip feature matrices (RGB, Flow, or the
//! late-fused concatenation of both). Each video is pooled into a fixed bag of
//! segments, a small fully connected network scores every segment, and the
//! network is trained with a multiple-instance ranking hinge loss that only
//! needs video-level labels: the highest-scoring segment of an abnormal video
//! must outrank the highest-scoring segment of a normal one. Sparsity and
//! temporal smoothness penalties on the abnormal bag shape the score profile.
//!
//! Evaluation expands segment scores back to frames and reports the pooled
//! frame-level ROC curve and its AUC.
//!
//! Module map:
//!
//! - [`features`]: binary feature container, manifests, stream fusion,
//!   clip-to-segment pooling, bag construction.
//! - [`scorer`]: the scoring network with forward pass, inverted dropout and
//!   manual backpropagation, plus the checkpoint format.
//! - [`objective`]: the ranking objective and its subgradients.
//! - [`optim`]: Adagrad and Adam with per-parameter state.
//! - [`trainer`]: batch sampling and the training loop.
//! - [`eval`]: frame expansion, ROC/AUC and the pair-counting oracle.
//! - [`synth`]: deterministic synthetic datasets and the planted-direction
//!   reference scorer.
//! - [`cli`]: the `milvad` command line (`gen`, `train`, `eval`, `score`,
//!   `sweep`).

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod objective;
pub mod optim;
pub mod scorer;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

/// Default number of segments per bag.
pub const DEFAULT_SEGMENTS: usize = 32;

/// Frames covered by one clip feature.
pub const FRAMES_PER_CLIP: usize = 16;
