//! Frame-level evaluation: segment scores are spread back over the frames
//! they cover, frames from all test videos are pooled, and the ROC curve and
//! its trapezoidal AUC are computed over the pool.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::features::{load_bags, Bag, DatasetManifest, Span, Stream};
use crate::scorer::ScoringNetwork;
use crate::{Error, Result};

/// Per-frame scores and ground truth for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub truth: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Frames scoring `>= threshold` are predicted anomalous. The first point
    /// uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    /// From `(0, 0)` to `(1, 1)`, thresholds descending.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Anything that can score the segments of a bag.
pub trait BagScorer: Sync {
    fn segment_scores(&self, bag: &Bag) -> Result<Vec<f64>>;

    fn frame_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(expand_to_frames(&self.segment_scores(bag)?, bag.num_frames))
    }
}

impl BagScorer for ScoringNetwork {
    fn segment_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(self.score(bag.segments.view())?.to_vec())
    }
}

/// Scores every segment with the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl BagScorer for ConstantScorer {
    fn segment_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(vec![self.0; bag.num_segments()])
    }
}

/// Reads the answer off the frame annotations: 1 inside a span, 0 outside.
#[derive(Debug, Clone, Copy)]
pub struct TruthScorer;

impl BagScorer for TruthScorer {
    fn segment_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        let truth = frame_truth(bag.num_frames, &bag.anomaly_spans);
        let n = bag.num_segments();
        Ok((0..n)
            .map(|i| {
                let (a, b) = frame_bounds(i, bag.num_frames, n);
                if truth[a..b].iter().any(|&t| t) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    fn frame_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(frame_truth(bag.num_frames, &bag.anomaly_spans)
            .into_iter()
            .map(|t| if t { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Frames `[floor(i*F/N), floor((i+1)*F/N))` covered by segment `i`.
pub fn frame_bounds(i: usize, num_frames: usize, n_segments: usize) -> (usize, usize) {
    (i * num_frames / n_segments, (i + 1) * num_frames / n_segments)
}

/// Gives every frame the score of the segment covering it.
pub fn expand_to_frames(segment_scores: &[f64], num_frames: usize) -> Vec<f64> {
    let n = segment_scores.len();
    let mut out = Vec::with_capacity(num_frames);
    for (i, &s) in segment_scores.iter().enumerate() {
        let (a, b) = frame_bounds(i, num_frames, n);
        out.extend(std::iter::repeat_n(s, b - a));
    }
    out
}

/// Frame `t` is positive iff it lies inside any span.
pub fn frame_truth(num_frames: usize, spans: &[Span]) -> Vec<bool> {
    let mut truth = vec![false; num_frames];
    for s in spans {
        let end = s.end.min(num_frames);
        for t in truth.iter_mut().take(end).skip(s.start) {
            *t = true;
        }
    }
    truth
}

fn pooled(videos: &[FrameScores]) -> (Vec<f64>, Vec<bool>) {
    let scores = videos.iter().flat_map(|v| v.scores.iter().copied()).collect();
    let truth = videos.iter().flat_map(|v| v.truth.iter().copied()).collect();
    (scores, truth)
}

fn class_counts(truth: &[bool]) -> Result<(usize, usize)> {
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels { positives, negatives });
    }
    Ok((positives, negatives))
}

/// ROC curve over parallel score/label slices. Equal scores form a single
/// threshold step.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocResult> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: scores.len(),
        });
    }
    let (positives, negatives) = class_counts(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let prev = *points.last().unwrap();
        let point = RocPoint {
            threshold,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
    }
    Ok(RocResult { points, auc })
}

/// Pooled frame-level ROC/AUC across videos.
pub fn roc_auc(videos: &[FrameScores]) -> Result<RocResult> {
    let (scores, truth) = pooled(videos);
    roc_curve(&scores, &truth)
}

/// AUC by exhaustive positive/negative pair enumeration, ties counting one
/// half.
pub fn auc_pair_oracle(videos: &[FrameScores]) -> Result<f64> {
    let (scores, truth) = pooled(videos);
    let (positives, negatives) = class_counts(&truth)?;
    let mut credit = 0.0;
    for (sp, _) in scores.iter().zip(&truth).filter(|(_, &t)| t) {
        for (sn, _) in scores.iter().zip(&truth).filter(|(_, &t)| !t) {
            if sp > sn {
                credit += 1.0;
            } else if sp == sn {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (positives as f64 * negatives as f64))
}

/// Trapezoidal area under a sequence of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Scores every bag, expands to frames and pools the ROC.
pub fn evaluate_bags<S: BagScorer + ?Sized>(scorer: &S, bags: &[Bag]) -> Result<(RocResult, Vec<FrameScores>)> {
    let videos = bags
        .par_iter()
        .map(|bag| {
            let scores = scorer.frame_scores(bag)?;
            Ok(FrameScores {
                video_id: bag.video_id.clone(),
                scores,
                truth: frame_truth(bag.num_frames, &bag.anomaly_spans),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((roc_auc(&videos)?, videos))
}

pub fn evaluate<S: BagScorer + ?Sized>(
    scorer: &S,
    manifest: &DatasetManifest,
    stream: Stream,
    n_segments: usize,
) -> Result<(RocResult, Vec<FrameScores>)> {
    let bags = load_bags(manifest, stream, n_segments)?;
    evaluate_bags(scorer, &bags)
}

/// `threshold,fpr,tpr` with a header row.
pub fn roc_csv(roc: &RocResult) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}

/// `video_id,frame,score,truth` with a header row.
pub fn frame_scores_csv(videos: &[FrameScores]) -> String {
    let mut out = String::from("video_id,frame,score,truth\n");
    for v in videos {
        for (t, (s, y)) in v.scores.iter().zip(&v.truth).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", v.video_id, t, s, u8::from(*y));
        }
    }
    out
}
