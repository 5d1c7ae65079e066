//! Frame-level ROC and AUC pooled over videos, with tied scores.

use milvad::eval::{auc_pair_oracle, expand_to_frames, frame_truth, roc_auc, roc_csv, FrameScores};
use milvad::features::Span;

fn main() -> milvad::Result<()> {
    // two segment scores stretched over 8 frames; anomaly in frames 2..6
    let a = FrameScores {
        video_id: "a".into(),
        scores: expand_to_frames(&[0.2, 0.9], 8),
        truth: frame_truth(8, &[Span::new(2, 6)]),
    };
    let b = FrameScores {
        video_id: "b".into(),
        scores: vec![0.2, 0.5, 0.5, 0.1],
        truth: vec![false; 4],
    };
    let videos = [a, b];
    let roc = roc_auc(&videos)?;
    print!("{}", roc_csv(&roc));
    println!("auc {:.6} (pair count {:.6})", roc.auc, auc_pair_oracle(&videos)?);
    Ok(())
}
