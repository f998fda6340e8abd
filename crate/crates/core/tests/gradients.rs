use kge::data::{Triple, WeightTable};
use kge::gradcheck::{central_differences, max_relative_error};
use kge::model::{accumulate_score_gradients, score_triple, ModelKind, ModelParams, Tables};
use kge::regularizer::{penalty, penalty_gradients, RegularizerKind, RegularizerSpec};
use kge::train::batch_objective;
use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-4;

const KINDS: [ModelKind; 3] = [ModelKind::Cp, ModelKind::ComplEx, ModelKind::Rescal];

fn regs() -> Vec<RegularizerSpec> {
    vec![
        RegularizerSpec::none(),
        RegularizerSpec::dura(0.3, 0.5, 1.5),
        RegularizerSpec::simple(RegularizerKind::BasicDura, 0.3),
        RegularizerSpec::simple(RegularizerKind::Fro, 0.3),
        RegularizerSpec::simple(RegularizerKind::N3, 0.3),
        RegularizerSpec::simple(RegularizerKind::RegP1, 0.3),
    ]
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Triple> {
    (0..n)
        .map(|_| Triple::new(rng.random_range(0..6), rng.random_range(0..4), rng.random_range(0..6)))
        .collect()
}

fn random_weights(rng: &mut ChaCha8Rng) -> WeightTable {
    WeightTable {
        weights: (0..6).map(|_| rng.random_range(0.5..1.0)).collect(),
        w0: 0.5,
    }
}

fn check_batch(kind: ModelKind, reg: &RegularizerSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::random(kind, 6, 4, 8, 0.5, seed).unwrap();
    let batch = random_batch(&mut rng, 5);
    let weights = random_weights(&mut rng);
    let mut analytic = Tables::zeros_like(&params.tables);
    batch_objective(&params, &batch, &weights, reg, Some(&mut analytic)).unwrap();
    let numeric = central_differences(&params, STEP, |p| {
        batch_objective(p, &batch, &weights, reg, None).unwrap()
    });
    max_relative_error(&analytic, &numeric, FLOOR)
}

fn applicable(kind: ModelKind, reg: &RegularizerSpec) -> bool {
    !(kind == ModelKind::Rescal && reg.kind == RegularizerKind::N3)
}

#[test]
fn full_objective_gradients_match_finite_differences() {
    for kind in KINDS {
        for reg in regs().iter().filter(|r| applicable(kind, r)) {
            for seed in 0..4 {
                let err = check_batch(kind, reg, seed);
                assert!(err < TOL, "{kind} {} seed {seed}: relative error {err:e}", reg.kind);
            }
        }
    }
}

#[test]
fn score_gradients_match_finite_differences() {
    for kind in KINDS {
        let params = ModelParams::random(kind, 6, 4, 8, 0.7, 3).unwrap();
        let (h, r) = (2, 1);
        let upstream = Array1::from_iter((0..6).map(|i| (i as f64 - 2.5) * 0.3));
        let mut analytic = Tables::zeros_like(&params.tables);
        accumulate_score_gradients(&params, h, r, upstream.view(), &mut analytic);
        let numeric = central_differences(&params, STEP, |p| {
            (0..6).map(|t| upstream[t] * score_triple(p, h, r, t)).sum()
        });
        let err = max_relative_error(&analytic, &numeric, FLOOR);
        assert!(err < TOL, "{kind}: {err:e}");
    }
}

#[test]
fn penalty_gradients_match_finite_differences() {
    for kind in KINDS {
        for reg in regs().iter().filter(|r| applicable(kind, r)) {
            let params = ModelParams::random(kind, 6, 4, 8, 0.9, 17).unwrap();
            let tr = Triple::new(4, 3, 1);
            let mut analytic = Tables::zeros_like(&params.tables);
            penalty_gradients(reg, &params, tr, &mut analytic).unwrap();
            let numeric = central_differences(&params, STEP, |p| penalty(reg, p, tr).unwrap());
            let err = max_relative_error(&analytic, &numeric, FLOOR);
            assert!(err < TOL, "{kind} {}: {err:e}", reg.kind);
        }
    }
}

#[test]
fn self_loop_triple_gradients() {
    // head == tail exercises both roles of one entity row
    for kind in KINDS {
        for reg in regs().iter().filter(|r| applicable(kind, r)) {
            let params = ModelParams::random(kind, 6, 4, 8, 0.6, 5).unwrap();
            let batch = [Triple::new(3, 2, 3)];
            let weights = WeightTable::uniform(6);
            let mut analytic = Tables::zeros_like(&params.tables);
            batch_objective(&params, &batch, &weights, reg, Some(&mut analytic)).unwrap();
            let numeric = central_differences(&params, STEP, |p| {
                batch_objective(p, &batch, &weights, reg, None).unwrap()
            });
            let err = max_relative_error(&analytic, &numeric, FLOOR);
            assert!(err < TOL, "{kind} {}: {err:e}", reg.kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_gradients_random_instances(seed in any::<u64>(), k in 0usize..3, r in 0usize..6) {
        let kind = KINDS[k];
        let reg = regs()[r];
        prop_assume!(applicable(kind, &reg));
        let err = check_batch(kind, &reg, seed);
        prop_assert!(err < TOL, "{} {}: {:e}", kind, reg.kind, err);
    }
}
