//! Trains CP with and without DURA and compares how test MRR holds up as
//! entity embeddings are thresholded to increasing sparsity.
//!
//! ```sh
//! cargo run --release --example sparsity_sweep
//! ```

use kge::prelude::*;
use kge::sparsity::csr_storage_numbers;
use kge::synthetic::{generate, SyntheticConfig};

fn main() -> kge::Result<()> {
    let kg = generate(&SyntheticConfig::default())?;
    let data = DataBundle::from_raw(kg.vocab, &kg.train, &kg.valid, &kg.test, 0.0)?;
    let model = ModelSpec {
        kind: ModelKind::Cp,
        dim: 32,
        init_scale: 1e-3,
    };
    let targets = [0.0, 0.2, 0.4, 0.6, 0.8];
    for reg in [RegularizerSpec::none(), RegularizerSpec::dura(0.05, 0.5, 1.5)] {
        let cfg = TrainConfig {
            max_epochs: 100,
            patience: 4,
            reg,
            ..TrainConfig::default()
        };
        let fitted = fit(model, &data, &cfg)?;
        let sweep = sparsity_mrr_sweep(&fitted.best, &data.test, &data.filter, &targets, 1)?;
        println!("== {} ==", reg.kind);
        print!("{}", sweep.to_csv());
        println!(
            "dense storage: {} numbers",
            csr_storage_numbers(&fitted.best.tables.entity) + csr_storage_numbers(fitted.best.tail_table())
        );
    }
    Ok(())
}
