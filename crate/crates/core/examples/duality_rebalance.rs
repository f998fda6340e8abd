//! Checks the balance conditions of random CP factors, rebalances them and
//! shows that scores are unchanged while the regularizer reaches its bound.
//!
//! ```sh
//! cargo run --example duality_rebalance
//! ```

use kge::duality::{model_balance_report, rebalance_model};
use kge::prelude::*;

fn main() -> kge::Result<()> {
    let params = ModelParams::random(ModelKind::Cp, 5, 3, 4, 1.0, 3)?;
    let before = model_balance_report(&params)?;
    let balanced = rebalance_model(&params)?;
    let after = model_balance_report(&balanced)?;

    println!("== before ==\n{}", before.to_text());
    println!("== after ==\n{}", after.to_text());

    let mut worst: f64 = 0.0;
    for h in 0..5 {
        for r in 0..3 {
            for t in 0..5 {
                let (a, b) = (score_triple(&params, h, r, t), score_triple(&balanced, h, r, t));
                worst = worst.max((a - b).abs() / a.abs().max(1e-300));
            }
        }
    }
    println!("largest relative score change: {worst:.2e}");
    println!(
        "regularizer {:.6} -> {:.6} (bound {:.6})",
        before.dura_value, after.dura_value, after.bound_value
    );
    Ok(())
}
