//! The MIL ranking objective on one bag pair and on a small batch.

use milvad::objective::{batch_loss, pair_loss, ranking_holds, ObjectiveConfig};

fn main() -> milvad::Result<()> {
    let cfg = ObjectiveConfig::default();
    let pos = [0.2, 0.9, 0.1];
    let neg = [0.3, 0.4];
    let l = pair_loss(&pos, &neg, &cfg)?;
    println!("pos {pos:?} neg {neg:?}");
    println!("  hinge      {:.7}", l.hinge_term);
    println!("  sparsity   {:.7}", l.sparsity_term);
    println!("  smoothness {:.7}", l.smoothness_term);
    println!("  total      {:.7}", l.total);
    println!("  argmax pos {} neg {}", l.argmax_pos, l.argmax_neg);
    println!("  grad pos {:?}", l.grad_pos);
    println!("  grad neg {:?}", l.grad_neg);
    println!("ranking holds: {}", ranking_holds(0.9, 0.4));

    // hinge is inactive once the positive max clears the negative by the margin
    let easy = ObjectiveConfig::new(0.3, 0.0, 0.0)?;
    println!("margin 0.3, no penalties: {}", pair_loss(&pos, &neg, &easy)?.total);

    let pairs = vec![(vec![0.9, 0.8], vec![0.1, 0.2]), (vec![0.1, 0.2], vec![0.9, 0.8])];
    let b = batch_loss(&pairs, &cfg)?;
    println!("batch of {}: mean total {:.6} (hinge {:.6})", b.pairs.len(), b.total, b.hinge);
    Ok(())
}
