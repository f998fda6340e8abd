//! Trains ComplEx with DURA on a synthetic low-rank graph and prints the
//! validation history and the test report.
//!
//! ```sh
//! KGE_LOG=info cargo run --release --example train_synthetic
//! ```

use kge::prelude::*;
use kge::synthetic::{generate, SyntheticConfig};
use kge::train::history_jsonl;

fn main() -> kge::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGE_LOG", "warn")).init();

    let kg = generate(&SyntheticConfig::default())?;
    let data = DataBundle::from_raw(kg.vocab, &kg.train, &kg.valid, &kg.test, 0.0)?;
    let model = ModelSpec {
        kind: ModelKind::ComplEx,
        dim: 32,
        init_scale: 1e-3,
    };
    let cfg = TrainConfig {
        max_epochs: 60,
        valid_every: 5,
        patience: 3,
        reg: RegularizerSpec::dura(0.05, 0.5, 1.5),
        ..TrainConfig::default()
    };
    let fitted = fit(model, &data, &cfg)?;
    print!("{}", history_jsonl(&fitted.history));
    println!("best epoch {} (valid MRR {:.4})", fitted.best_epoch, fitted.best_valid_mrr);
    println!("{}", evaluate(&fitted.best, &data.test, &data.filter)?);
    Ok(())
}
