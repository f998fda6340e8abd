//! Compares analytic gradients of the training objective with central
//! finite differences for every model and regularizer.
//!
//! ```sh
//! cargo run --example gradient_check
//! ```

use kge::gradcheck::{central_differences, max_relative_error};
use kge::prelude::*;
use kge::train::batch_objective;

fn main() -> kge::Result<()> {
    let batch = [Triple::new(0, 1, 2), Triple::new(3, 0, 5), Triple::new(4, 3, 4)];
    let weights = WeightTable::uniform(6);
    let regs = [
        RegularizerSpec::none(),
        RegularizerSpec::dura(0.1, 0.5, 1.5),
        RegularizerSpec::simple(RegularizerKind::BasicDura, 0.1),
        RegularizerSpec::simple(RegularizerKind::Fro, 0.1),
        RegularizerSpec::simple(RegularizerKind::N3, 0.1),
        RegularizerSpec::simple(RegularizerKind::RegP1, 0.1),
    ];
    println!("{:<8} {:<10} {:>12}", "model", "reg", "max rel err");
    for kind in [ModelKind::Cp, ModelKind::ComplEx, ModelKind::Rescal] {
        let params = ModelParams::random(kind, 6, 4, 8, 0.5, 1)?;
        for reg in &regs {
            if reg.validate(kind).is_err() {
                println!("{:<8} {:<10} {:>12}", kind.to_string(), reg.kind.to_string(), "n/a");
                continue;
            }
            let mut analytic = Tables::zeros_like(&params.tables);
            batch_objective(&params, &batch, &weights, reg, Some(&mut analytic))?;
            let numeric = central_differences(&params, 1e-5, |p| {
                batch_objective(p, &batch, &weights, reg, None).expect("objective is finite")
            });
            let err = max_relative_error(&analytic, &numeric, 1e-4);
            println!("{:<8} {:<10} {:>12.2e}", kind.to_string(), reg.kind.to_string(), err);
        }
    }
    Ok(())
}
