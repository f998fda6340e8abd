use std::collections::BTreeSet;

use kge::data::{add_reciprocals, tail_frequency_weights, Split, Triple, TripleStore, Vocab};
use kge::duality::{balance_report, rebalance};
use kge::eval::rank_from_scores;
use kge::model::{score_all_tails, score_triple, ModelKind, ModelParams, Tables};
use kge::sparsity::{lambda_sparsity, sparsify, threshold_for_sparsity};
use kge::train::{adagrad_step, cross_entropy_loss, AdagradState};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn kind_of(k: usize) -> ModelKind {
    [ModelKind::Cp, ModelKind::ComplEx, ModelKind::Rescal][k]
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn triples(n_ent: usize, n_rel: usize) -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec((0..n_ent, 0..n_rel, 0..n_ent), 1..30)
        .prop_map(|v| v.into_iter().map(|(h, r, t)| Triple::new(h, r, t)).collect())
}

fn toy_vocab(n_ent: usize, n_rel: usize) -> Vocab {
    Vocab::from_names(
        (0..n_ent).map(|i| format!("e{i}")).collect(),
        (0..n_rel).map(|i| format!("r{i}")).collect(),
        false,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_linear_in_head(k in 0usize..3, seed in any::<u64>(), c in -4.0f64..4.0) {
        let kind = kind_of(k);
        let mut p = ModelParams::random(kind, 4, 3, 6, 1.0, seed).unwrap();
        let before = score_triple(&p, 1, 2, 3);
        p.tables.entity.row_mut(1).mapv_inplace(|x| x * c);
        let after = score_triple(&p, 1, 2, 3);
        prop_assert!((after - c * before).abs() <= 1e-12 * (1.0 + before.abs() * c.abs()));
    }

    #[test]
    fn all_tails_agrees_with_single_scores(k in 0usize..3, seed in any::<u64>(), h in 0usize..5, r in 0usize..3) {
        let p = ModelParams::random(kind_of(k), 5, 3, 4, 1.0, seed).unwrap();
        let all = score_all_tails(&p, h, r);
        for t in 0..5 {
            let s = score_triple(&p, h, r, t);
            prop_assert!((all[t] - s).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn reciprocals_double_the_split(ts in triples(6, 3)) {
        let mut vocab = toy_vocab(6, 3);
        let store = TripleStore::new(Split::Train, ts.clone());
        let aug = add_reciprocals(&store, &mut vocab).unwrap();
        prop_assert_eq!(aug.len(), 2 * ts.len());
        prop_assert_eq!(vocab.n_relations_total(), 6);
        for t in &ts {
            prop_assert!(aug.triples.contains(&Triple::new(t.tail, t.relation + 3, t.head)));
        }
        prop_assert!(add_reciprocals(&aug, &mut vocab).is_err());
    }

    #[test]
    fn weights_within_bounds(ts in triples(8, 2), w0 in 0.0f64..=1.0) {
        let table = tail_frequency_weights(&TripleStore::new(Split::Train, ts), w0, 8).unwrap();
        for &w in &table.weights {
            prop_assert!(w >= 1.0 - w0 - 1e-15 && w <= 1.0 + 1e-15);
        }
        let max = table.weights.iter().copied().fold(f64::MIN, f64::max);
        prop_assert!((max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_invariant_under_monotone_maps(
        scores in prop::collection::vec(-5.0f64..5.0, 2..20),
        pick in any::<prop::sample::Index>(),
        a in 0.1f64..3.0,
        b in -2.0f64..2.0,
    ) {
        let s = Array1::from(scores);
        let t = pick.index(s.len());
        let none = BTreeSet::new();
        let mapped = s.mapv(|x| (a * x + b).tanh() + a * x);
        prop_assert_eq!(rank_from_scores(s.view(), t, &none), rank_from_scores(mapped.view(), t, &none));
    }

    #[test]
    fn filtering_never_raises_rank(
        scores in prop::collection::vec(-5.0f64..5.0, 2..20),
        pick in any::<prop::sample::Index>(),
        known in prop::collection::btree_set(0usize..20, 0..10),
    ) {
        let s = Array1::from(scores);
        let t = pick.index(s.len());
        let raw = rank_from_scores(s.view(), t, &BTreeSet::new());
        let filtered = rank_from_scores(s.view(), t, &known);
        prop_assert!(filtered <= raw && filtered >= 1);
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero(
        scores in prop::collection::vec(-50.0f64..50.0, 1..30),
        pick in any::<prop::sample::Index>(),
        w in 0.0f64..=1.0,
    ) {
        let s = Array1::from(scores);
        let t = pick.index(s.len());
        let (loss, g) = cross_entropy_loss(s.view(), t, w).unwrap();
        prop_assert!(g.sum().abs() < 1e-12);
        let naive = w * (s.mapv(f64::exp).sum().ln() - s[t]);
        prop_assert!((loss - naive).abs() < 1e-9);
    }

    #[test]
    fn adagrad_accumulator_is_monotone(seed in any::<u64>(), steps in 1usize..5) {
        let mut p = ModelParams::random(ModelKind::Cp, 3, 2, 4, 1.0, seed).unwrap();
        let mut state = AdagradState::new(&p);
        for i in 0..steps {
            let mut g = Tables::zeros_like(&p.tables);
            let src = ModelParams::random(ModelKind::Cp, 3, 2, 4, 1.0, seed ^ i as u64).unwrap();
            // half the coordinates stay exactly zero
            for (dst, s) in g.arrays_mut().zip(src.tables.arrays()) {
                ndarray::Zip::from(dst).and(s).for_each(|d, &s| if s > 0.0 { *d = s });
            }
            let before = state.clone();
            let frozen = p.clone();
            adagrad_step(&mut p, &g, &mut state, 0.1, 1e-10);
            for ((a, b), gg) in state.sum_sq.arrays().zip(before.sum_sq.arrays()).zip(g.arrays()) {
                for ((&x, &y), &gv) in a.iter().zip(b.iter()).zip(gg.iter()) {
                    prop_assert!(x >= y);
                    if gv == 0.0 { prop_assert_eq!(x, y); }
                }
            }
            for ((pa, pb), gg) in p.tables.arrays().zip(frozen.tables.arrays()).zip(g.arrays()) {
                for ((&x, &y), &gv) in pa.iter().zip(pb.iter()).zip(gg.iter()) {
                    if gv == 0.0 { prop_assert_eq!(x, y); }
                }
            }
        }
    }

    #[test]
    fn sparsify_reaches_lambda_sparsity(e in matrix(5, 4), thr in 0.0f64..3.0) {
        let s = sparsify(&e, thr);
        let zeros = s.iter().filter(|&&x| x == 0.0).count() as f64 / s.len() as f64;
        prop_assert!(zeros >= lambda_sparsity(&e, thr));
        prop_assert!(s.iter().zip(e.iter()).all(|(&a, &b)| a == 0.0 || a == b));
    }

    #[test]
    fn threshold_meets_target(e in matrix(4, 5), target in 0.0f64..=1.0) {
        let (thr, achieved) = threshold_for_sparsity(&e, target).unwrap();
        prop_assert!(achieved + 1e-12 >= target);
        prop_assert_eq!(achieved, lambda_sparsity(&e, thr));
        // no smaller grid value would do
        let below = e.iter().map(|x| x.abs()).filter(|&v| v < thr).fold(0.0, f64::max);
        if below > 0.0 {
            prop_assert!(lambda_sparsity(&e, below) < target);
        }
    }

    #[test]
    fn rebalance_is_idempotent(h in matrix(4, 3), r in matrix(3, 3), t in matrix(4, 3)) {
        let (h1, r1, t1) = rebalance(&h, &r, &t).unwrap();
        let (h2, r2, t2) = rebalance(&h1, &r1, &t1).unwrap();
        for (a, b) in [(&h1, &h2), (&r1, &r2), (&t1, &t2)] {
            for (&x, &y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn dura_bound_holds(h in matrix(4, 3), r in matrix(2, 3), t in matrix(4, 3)) {
        let rep = balance_report(&h, &r, &t).unwrap();
        prop_assert!(rep.gap() >= -1e-9 * (1.0 + rep.dura_value));
    }
}
