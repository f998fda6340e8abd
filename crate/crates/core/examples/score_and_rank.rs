//! Scores triples with each model family and computes filtered ranks.
//!
//! ```sh
//! cargo run --example score_and_rank
//! ```

use kge::eval::{rank_from_scores, ranks};
use kge::prelude::*;

fn main() -> kge::Result<()> {
    for kind in [ModelKind::Cp, ModelKind::ComplEx, ModelKind::Rescal] {
        let params = ModelParams::random(kind, 8, 2, 4, 1.0, 42)?;
        let scores = score_all_tails(&params, 0, 1);
        println!("{kind:<8} scores for (e0, r1, ?): {:.3}", scores);
        assert!((scores[5] - score_triple(&params, 0, 1, 5)).abs() < 1e-12);
    }

    // filtered rank: other known tails are skipped, ties do not count against
    let scores = ndarray::array![0.9, 0.5, 0.7, 0.5, 0.1];
    let known = [0usize].into_iter().collect();
    println!("raw rank of tail 2: {}", rank_from_scores(scores.view(), 2, &Default::default()));
    println!("filtered rank of tail 2 (tail 0 known): {}", rank_from_scores(scores.view(), 2, &known));

    let params = ModelParams::random(ModelKind::ComplEx, 8, 2, 4, 1.0, 7)?;
    let test = TripleStore::new(
        Split::Test,
        vec![Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(3, 1, 4)],
    );
    let filter = build_filter_index([&test]);
    println!("ranks: {:?}", ranks(&params, &test, &filter)?);
    println!("{}", evaluate(&params, &test, &filter)?);
    Ok(())
}
