//! Compares the scorer's backward pass and the ranking loss gradients with
//! central finite differences.

use milvad::objective::{pair_loss, ObjectiveConfig};
use milvad::scorer::{Mode, ScoringNetwork};
use ndarray::array;

const H: f64 = 1e-5;

fn main() -> milvad::Result<()> {
    let net = ScoringNetwork::init_with_hidden(4, 8, 4, 0.0, 11)?;
    let x = array![[0.3, -0.2, 0.9, 0.1], [-0.5, 0.4, 0.2, 0.7]];
    let upstream = [1.0, -0.5];
    let objective = |n: &ScoringNetwork| -> f64 {
        let s = n.score(x.view()).unwrap();
        s[0] * upstream[0] + s[1] * upstream[1]
    };

    let (_, trace) = net.forward_bag(x.view(), Mode::Eval)?;
    let grads = net.backward(&trace, &upstream)?;
    for (ti, name) in milvad::scorer::Params::tensor_names().iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &a) in grads.tensors()[ti].iter().enumerate() {
            let (mut plus, mut minus) = (net.clone(), net.clone());
            plus.params.tensors_mut()[ti][k] += H;
            minus.params.tensors_mut()[ti][k] -= H;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * H);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("scorer {name}: max relative error {worst:.2e}");
    }

    let cfg = ObjectiveConfig::default();
    let (pos, neg) = (vec![0.2, 0.9, 0.1], vec![0.3, 0.4]);
    let loss = pair_loss(&pos, &neg, &cfg)?;
    for i in 0..pos.len() {
        let (mut a, mut b) = (pos.clone(), pos.clone());
        a[i] += H;
        b[i] -= H;
        let numeric = (pair_loss(&a, &neg, &cfg)?.total - pair_loss(&b, &neg, &cfg)?.total) / (2.0 * H);
        println!("d loss / d pos[{i}]: analytic {:+.8} numeric {:+.8}", loss.grad_pos[i], numeric);
    }
    Ok(())
}
