//! Multiple-instance ranking objective over a pair of bags.
//!
//! For an abnormal bag with segment scores `p` and a normal bag with scores
//! `q`:
//!
//! ```text
//! loss = max(0, margin - max(p) + max(q))
//!      + lambda1 * sum_i p_i
//!      + lambda2 * sum_{i<n} (p_i - p_{i+1})^2
//! ```
//!
//! Only the abnormal bag carries the sparsity and smoothness terms.

use crate::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 0.00008;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub margin: f64,
    /// Sparsity weight.
    pub lambda1: f64,
    /// Temporal smoothness weight.
    pub lambda2: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            lambda1: DEFAULT_LAMBDA,
            lambda2: DEFAULT_LAMBDA,
        }
    }
}

impl ObjectiveConfig {
    pub fn new(margin: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let cfg = Self {
            margin,
            lambda1,
            lambda2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::InvalidObjective(format!("margin {} must be > 0", self.margin)));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidObjective(format!("{name} {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Loss terms and score subgradients for one abnormal/normal bag pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BagPairLoss {
    pub total: f64,
    pub hinge_term: f64,
    pub sparsity_term: f64,
    pub smoothness_term: f64,
    /// d total / d abnormal-bag scores.
    pub grad_pos: Vec<f64>,
    /// d total / d normal-bag scores.
    pub grad_neg: Vec<f64>,
    pub argmax_pos: usize,
    pub argmax_neg: usize,
}

/// Strict ranking: the abnormal score must exceed the normal one.
pub fn ranking_holds(score_abnormal: f64, score_normal: f64) -> bool {
    score_abnormal > score_normal
}

/// Maximum score and the lowest index attaining it.
pub fn bag_max(scores: &[f64]) -> Result<(f64, usize)> {
    let (&first, rest) = scores.split_first().ok_or(Error::EmptyBag)?;
    let mut best = (first, 0);
    for (i, &s) in rest.iter().enumerate() {
        if s > best.0 {
            best = (s, i + 1);
        }
    }
    Ok(best)
}

pub fn pair_loss(pos: &[f64], neg: &[f64], cfg: &ObjectiveConfig) -> Result<BagPairLoss> {
    cfg.validate()?;
    let (max_pos, argmax_pos) = bag_max(pos)?;
    let (max_neg, argmax_neg) = bag_max(neg)?;

    let mut grad_pos = vec![0.0; pos.len()];
    let mut grad_neg = vec![0.0; neg.len()];

    let slack = cfg.margin - max_pos + max_neg;
    let hinge_term = slack.max(0.0);
    if slack > 0.0 {
        grad_pos[argmax_pos] -= 1.0;
        grad_neg[argmax_neg] += 1.0;
    }

    let sparsity_term = cfg.lambda1 * pos.iter().sum::<f64>();
    for g in grad_pos.iter_mut() {
        *g += cfg.lambda1;
    }

    let mut smooth_sum = 0.0;
    for (i, w) in pos.windows(2).enumerate() {
        let diff = w[0] - w[1];
        smooth_sum += diff * diff;
        grad_pos[i] += 2.0 * cfg.lambda2 * diff;
        grad_pos[i + 1] -= 2.0 * cfg.lambda2 * diff;
    }
    let smoothness_term = cfg.lambda2 * smooth_sum;

    Ok(BagPairLoss {
        total: hinge_term + sparsity_term + smoothness_term,
        hinge_term,
        sparsity_term,
        smoothness_term,
        grad_pos,
        grad_neg,
        argmax_pos,
        argmax_neg,
    })
}

/// Mean objective over a batch of bag pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    pub hinge: f64,
    pub sparsity: f64,
    pub smoothness: f64,
    /// Per-pair terms. Term values are the pair's own; gradients are scaled
    /// by `1 / pairs.len()` so they are gradients of the batch mean.
    pub pairs: Vec<BagPairLoss>,
}

pub fn batch_loss<P, N>(pairs: &[(P, N)], cfg: &ObjectiveConfig) -> Result<BatchLoss>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let k = pairs.len() as f64;
    let mut out = BatchLoss {
        total: 0.0,
        hinge: 0.0,
        sparsity: 0.0,
        smoothness: 0.0,
        pairs: Vec::with_capacity(pairs.len()),
    };
    for (pos, neg) in pairs {
        let mut l = pair_loss(pos.as_ref(), neg.as_ref(), cfg)?;
        out.total += l.total;
        out.hinge += l.hinge_term;
        out.sparsity += l.sparsity_term;
        out.smoothness += l.smoothness_term;
        l.grad_pos.iter_mut().chain(l.grad_neg.iter_mut()).for_each(|g| *g /= k);
        out.pairs.push(l);
    }
    out.total /= k;
    out.hinge /= k;
    out.sparsity /= k;
    out.smoothness /= k;
    Ok(out)
}
