//! Adagrad and Adam minimising the same quadratic from the same start.

use milvad::optim::{OptimizerKind, OptimizerState};

fn main() -> milvad::Result<()> {
    let target = [3.0, -1.0, 0.5];
    for kind in [OptimizerKind::Adagrad, OptimizerKind::Adam] {
        let mut opt = OptimizerState::new(kind, 0.1);
        let mut theta = [0.0; 3];
        for step in 1..=300 {
            let g: Vec<f64> = theta.iter().zip(&target).map(|(t, c)| 2.0 * (t - c)).collect();
            opt.step(&mut [&mut theta[..]], &[&g[..]])?;
            if step % 100 == 0 {
                let loss: f64 = theta.iter().zip(&target).map(|(t, c)| (t - c) * (t - c)).sum();
                println!("{:>7} step {step:>3}: loss {loss:.6e}", kind.name());
            }
        }
    }
    Ok(())
}
