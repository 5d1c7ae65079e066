//! Trains every optimizer / learning-rate cell on the same synthetic data and
//! ranks them by test AUC.
//!
//! `cargo run --release --example lr_sweep -- [iterations]`

use milvad::eval::evaluate_bags;
use milvad::features::{load_bags, Stream};
use milvad::optim::sweep_grid;
use milvad::synth::{generate, SynthSpec};
use milvad::trainer::{train_bags, TrainConfig};

fn main() -> milvad::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let dir = tempfile::tempdir().expect("temp dir");
    let spec = SynthSpec::new(16);
    let data = generate(&spec, dir.path())?;
    let train = load_bags(&data.train, Stream::Fused, 32)?;
    let test = load_bags(&data.test, Stream::Fused, 32)?;

    let mut rows = Vec::new();
    for (optimizer, learning_rate) in sweep_grid() {
        let config = TrainConfig {
            optimizer,
            learning_rate,
            batch_pairs: 20,
            iterations,
            record_time: false,
            ..TrainConfig::default()
        };
        let (model, log) = train_bags(&train, &config)?;
        let auc = evaluate_bags(&model, &test)?.0.auc;
        rows.push((optimizer, learning_rate, auc, log.totals().last().copied().unwrap_or(f64::NAN)));
    }
    rows.sort_by(|a, b| b.2.total_cmp(&a.2));
    println!("optimizer,lr,auc,final_loss");
    for (k, lr, auc, loss) in rows {
        println!("{k},{lr},{auc:.6},{loss:.6}");
    }
    Ok(())
}
