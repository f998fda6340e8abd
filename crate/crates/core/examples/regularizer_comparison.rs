//! Trains RESCAL on a synthetic low-rank graph without regularization, with
//! FRO and with DURA, and reports validation-selected test MRR.
//!
//! ```sh
//! cargo run --release --example regularizer_comparison -- [kind] [dim] [epochs]
//! ```

use std::env;

use kge::prelude::*;
use kge::synthetic::{generate, SyntheticConfig};
use rayon::prelude::*;

fn main() -> kge::error::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let kind: ModelKind = args.first().map_or(Ok(ModelKind::Rescal), |s| s.parse())?;
    let dim: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);

    let kg = generate(&SyntheticConfig::default())?;
    let data = DataBundle::from_raw(kg.vocab, &kg.train, &kg.valid, &kg.test, 0.0)?;
    println!(
        "{} train / {} valid / {} test triples (with reciprocals)",
        data.train.len(),
        data.valid.len(),
        data.test.len()
    );

    let mut regs = vec![RegularizerSpec::none()];
    for lambda in [0.01, 0.05, 0.1] {
        regs.push(RegularizerSpec::simple(RegularizerKind::Fro, lambda));
        regs.push(RegularizerSpec::dura(lambda, 1.0, 1.0));
    }
    let model = ModelSpec {
        kind,
        dim,
        init_scale: 1e-3,
    };
    let results: Vec<_> = regs
        .par_iter()
        .map(|reg| {
            let cfg = TrainConfig {
                max_epochs: epochs,
                patience: epochs,
                reg: *reg,
                ..TrainConfig::default()
            };
            let fit = fit(model, &data, &cfg)?;
            let test = evaluate(&fit.best, &data.test, &data.filter)?;
            Ok((*reg, fit.best_epoch, fit.best_valid_mrr, test.mrr))
        })
        .collect::<kge::error::Result<_>>()?;

    println!("{:<10} {:>7} {:>6} {:>9} {:>8}", "reg", "lambda", "epoch", "valid", "test");
    for (reg, epoch, valid, test) in results {
        println!(
            "{:<10} {:>7} {:>6} {:>9.4} {:>8.4}",
            reg.kind.to_string(),
            reg.lambda,
            epoch,
            valid,
            test
        );
    }
    Ok(())
}
