//! Generates a synthetic dataset, trains the scorer on it and compares the
//! result against the planted-direction reference scorer.
//!
//! `cargo run --release --example synthetic_training -- [iterations]`

use milvad::eval::{evaluate_bags, ConstantScorer};
use milvad::features::{load_bags, Stream};
use milvad::synth::{generate, oracle_scorer, SynthSpec};
use milvad::trainer::{median, train_bags, TrainConfig};

fn main() -> milvad::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let dir = tempfile::tempdir().expect("temp dir");
    let spec = SynthSpec::new(32);
    let data = generate(&spec, dir.path())?;

    let train = load_bags(&data.train, Stream::Fused, 32)?;
    let test = load_bags(&data.test, Stream::Fused, 32)?;
    let config = TrainConfig {
        batch_pairs: 20,
        iterations,
        record_time: false,
        ..TrainConfig::default()
    };
    let (model, log) = train_bags(&train, &config)?;

    let totals = log.totals();
    let k = (totals.len() / 10).max(1);
    println!("{} iterations, median loss first 10% {:.4}, last 10% {:.4}", totals.len(), median(&totals[..k]), median(&totals[totals.len() - k..]));
    println!("model     auc {:.6}", evaluate_bags(&model, &test)?.0.auc);
    println!("reference auc {:.6}", evaluate_bags(&oracle_scorer(&spec), &test)?.0.auc);
    println!("constant  auc {:.6}", evaluate_bags(&ConstantScorer(0.5), &test)?.0.auc);
    Ok(())
}
