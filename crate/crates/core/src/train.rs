//! Weighted multiclass cross-entropy training with Adagrad.
//!
//! Every (augmented) training triple `(h, r, t)` is a classification query
//! `(h, r, ?)` over all entities. The per-batch objective is the mean over
//! the batch of `w(t) * CE(scores, t) + penalty(h, r, t)`, and one Adagrad
//! step is taken per batch.

use std::path::Path;

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    add_reciprocals, build_filter_index, load_triples, load_triples_fixed, tail_frequency_weights, FilterIndex, Split,
    Triple, TripleStore, Vocab, WeightTable,
};
use crate::error::{KgeError, Result};
use crate::eval::{evaluate, evaluate_parallel};
use crate::model::{accumulate_score_gradients, score_all_tails, Gradients, ModelKind, ModelParams, Tables};
use crate::regularizer::{accumulate_penalty_gradients, penalty, RegularizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub w0: f64,
    pub valid_every: usize,
    pub patience: usize,
    pub seed: u64,
    pub workers: usize,
    pub reg: RegularizerSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            max_epochs: 100,
            learning_rate: 0.1,
            adagrad_epsilon: 1e-10,
            w0: 0.0,
            valid_every: 5,
            patience: 5,
            seed: 0,
            workers: 1,
            reg: RegularizerSpec::none(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(KgeError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(KgeError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.w0) {
            return Err(KgeError::Config(format!("w0 must lie in [0, 1], got {}", self.w0)));
        }
        if self.valid_every == 0 {
            return Err(KgeError::Config("valid_every must be at least 1".into()));
        }
        if !(self.adagrad_epsilon >= 0.0) {
            return Err(KgeError::Config("adagrad epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Shape of the model to train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dim: usize,
    pub init_scale: f64,
}

/// `(loss, dL/dscores)` for `weight * (logsumexp(s) - s[target])`.
pub fn cross_entropy_loss(
    scores: ArrayView1<'_, f64>,
    target: usize,
    weight: f64,
) -> Result<(f64, Array1<f64>)> {
    if target >= scores.len() {
        return Err(KgeError::Contract(format!(
            "target {target} out of bounds for {} scores",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(KgeError::Numeric("non-finite score in cross-entropy".into()));
    }
    let max = scores.fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let mut probs = scores.mapv(|s| (s - max).exp());
    let z: f64 = probs.sum();
    let loss = weight * (max + z.ln() - scores[target]);
    probs.mapv_inplace(|p| weight * p / z);
    probs[target] -= weight;
    Ok((loss, probs))
}

/// Accumulated squared gradients, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub sum_sq: Tables,
}

impl AdagradState {
    pub fn new(params: &ModelParams) -> Self {
        AdagradState {
            sum_sq: Tables::zeros_like(&params.tables),
        }
    }
}

/// Sparse Adagrad update: coordinates whose gradient is exactly zero are
/// left untouched (both the parameter and its accumulator).
pub fn adagrad_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdagradState,
    lr: f64,
    eps: f64,
) {
    for ((p, g), s) in params
        .tables
        .arrays_mut()
        .zip(grads.arrays())
        .zip(state.sum_sq.arrays_mut())
    {
        ndarray::Zip::from(p).and(g).and(s).for_each(|p, &g, s| {
            if g != 0.0 {
                *s += g * g;
                *p -= lr * g / (s.sqrt() + eps);
            }
        });
    }
}

/// Objective and gradient of one batch, `mean_i [w(t_i) CE_i + penalty_i]`.
///
/// With `grads = None` only the value is computed.
pub fn batch_objective(
    params: &ModelParams,
    batch: &[Triple],
    weights: &WeightTable,
    reg: &RegularizerSpec,
    mut grads: Option<&mut Gradients>,
) -> Result<f64> {
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &tr in batch {
        total += triple_objective(params, tr, weights, reg, scale, grads.as_deref_mut())?;
    }
    Ok(total * scale)
}

fn triple_objective(
    params: &ModelParams,
    tr: Triple,
    weights: &WeightTable,
    reg: &RegularizerSpec,
    scale: f64,
    grads: Option<&mut Gradients>,
) -> Result<f64> {
    let scores = score_all_tails(params, tr.head, tr.relation);
    let (loss, mut dl) = cross_entropy_loss(scores.view(), tr.tail, weights.get(tr.tail))?;
    let pen = match grads {
        Some(g) => {
            dl *= scale;
            accumulate_score_gradients(params, tr.head, tr.relation, dl.view(), g);
            if reg.is_inactive() {
                0.0
            } else {
                accumulate_penalty_gradients(reg, params, tr, scale, g)?
            }
        }
        None if reg.is_inactive() => 0.0,
        None => penalty(reg, params, tr)?,
    };
    Ok(loss + pen)
}

/// Reusable per-worker gradient buffers.
pub struct Workspace {
    buffers: Vec<Gradients>,
}

impl Workspace {
    pub fn new(params: &ModelParams, workers: usize) -> Self {
        Workspace {
            buffers: (0..workers.max(1))
                .map(|_| Tables::zeros_like(&params.tables))
                .collect(),
        }
    }
}

/// One shuffled pass over `train`; returns the mean per-triple objective.
///
/// With more than one workspace buffer the batch is split into contiguous
/// chunks processed on the current rayon pool and merged in chunk order.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    params: &mut ModelParams,
    train: &TripleStore,
    weights: &WeightTable,
    cfg: &TrainConfig,
    state: &mut AdagradState,
    rng: &mut ChaCha8Rng,
    workspace: &mut Workspace,
    epoch: usize,
) -> Result<f64> {
    if train.is_empty() {
        return Err(KgeError::Empty("train split has no triples".into()));
    }
    let mut order = train.triples.clone();
    order.shuffle(rng);

    let mut objective_sum = 0.0;
    for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
        let scale = 1.0 / batch.len() as f64;
        let n_chunks = workspace.buffers.len().min(batch.len());
        let chunk_len = batch.len().div_ceil(n_chunks);
        let p: &ModelParams = params;

        let run_chunk = |offset: usize, chunk: &[Triple], buf: &mut Gradients| -> Result<f64> {
            buf.fill(0.0);
            let mut sum = 0.0;
            for (i, &tr) in chunk.iter().enumerate() {
                let at = || {
                    format!(
                        "epoch {epoch}, batch {batch_idx}, triple {} ({}, {}, {})",
                        offset + i,
                        tr.head,
                        tr.relation,
                        tr.tail
                    )
                };
                let v = match triple_objective(p, tr, weights, &cfg.reg, scale, Some(buf)) {
                    Err(KgeError::Numeric(msg)) => {
                        return Err(KgeError::Numeric(format!("{msg} at {}", at())))
                    }
                    other => other?,
                };
                if !v.is_finite() {
                    return Err(KgeError::Numeric(format!("non-finite objective at {}", at())));
                }
                sum += v;
            }
            Ok(sum)
        };

        let sums: Vec<f64> = if n_chunks == 1 {
            vec![run_chunk(0, batch, &mut workspace.buffers[0])?]
        } else {
            batch
                .par_chunks(chunk_len)
                .zip(workspace.buffers.par_iter_mut())
                .enumerate()
                .map(|(k, (chunk, buf))| run_chunk(k * chunk_len, chunk, buf))
                .collect::<Result<Vec<_>>>()?
        };
        let used = batch.len().div_ceil(chunk_len);
        let (first, rest) = workspace.buffers.split_at_mut(1);
        for other in &rest[..used - 1] {
            first[0].add_assign(other);
        }
        objective_sum += sums.iter().sum::<f64>();
        if first[0].arrays().any(|a| a.iter().any(|g| !g.is_finite())) {
            return Err(KgeError::Numeric(format!(
                "non-finite gradient at epoch {epoch}, batch {batch_idx}"
            )));
        }
        adagrad_step(params, &first[0], state, cfg.learning_rate, cfg.adagrad_epsilon);
    }
    Ok(objective_sum / train.len() as f64)
}

/// Everything a training run reads. All stores are reciprocal-augmented.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub vocab: Vocab,
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
    pub filter: FilterIndex,
    pub weights: WeightTable,
}

impl DataBundle {
    /// Builds a bundle from raw (non-augmented) splits.
    pub fn from_raw(
        mut vocab: Vocab,
        train: &TripleStore,
        valid: &TripleStore,
        test: &TripleStore,
        w0: f64,
    ) -> Result<Self> {
        let train = add_reciprocals(train, &mut vocab)?;
        let valid = add_reciprocals(valid, &mut vocab)?;
        let test = add_reciprocals(test, &mut vocab)?;
        let filter = build_filter_index([&train, &valid, &test]);
        let weights = tail_frequency_weights(&train, w0, vocab.n_entities())?;
        Ok(DataBundle {
            vocab,
            train,
            valid,
            test,
            filter,
            weights,
        })
    }

    /// Loads three TSV splits, building the vocabulary from the train file.
    pub fn load(
        train: impl AsRef<Path>,
        valid: impl AsRef<Path>,
        test: impl AsRef<Path>,
        w0: f64,
    ) -> Result<Self> {
        let mut vocab = Vocab::new();
        let tr = load_triples(train, Split::Train, &mut vocab)?;
        let va = load_triples(valid, Split::Valid, &mut vocab)?;
        let te = load_triples(test, Split::Test, &mut vocab)?;
        Self::from_raw(vocab, &tr, &va, &te, w0)
    }

    /// Loads splits against a fixed vocabulary (e.g. one stored in a model
    /// file); unseen names are rejected in every split.
    pub fn load_with_vocab(
        vocab: &Vocab,
        train: impl AsRef<Path>,
        valid: impl AsRef<Path>,
        test: impl AsRef<Path>,
        w0: f64,
    ) -> Result<Self> {
        let mut base = Vocab::from_names(
            vocab.entity_names().to_vec(),
            vocab.relation_names().to_vec(),
            false,
        )?;
        let tr = load_triples_fixed(train, Split::Train, &mut base)?;
        let va = load_triples_fixed(valid, Split::Valid, &mut base)?;
        let te = load_triples_fixed(test, Split::Test, &mut base)?;
        Self::from_raw(base, &tr, &va, &te, w0)
    }
}

/// One validation checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub objective: f64,
    pub valid_mrr: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_valid_mrr: f64,
    pub history: Vec<HistoryRecord>,
}

/// Writes history as JSON lines.
pub fn history_jsonl(history: &[HistoryRecord]) -> String {
    history
        .iter()
        .map(|h| serde_json::to_string(h).expect("history serializes") + "\n")
        .collect()
}

/// Trains from a seeded initialization, validating every `valid_every`
/// epochs (and after the last epoch) and keeping the parameters with the
/// best validation MRR.
///
/// Stops once `patience + 1` consecutive validations fail to improve, so
/// `patience = 0` stops at the first non-improvement.
pub fn fit(model: ModelSpec, data: &DataBundle, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    cfg.reg.validate(model.kind)?;
    let init = ModelParams::random(
        model.kind,
        data.vocab.n_entities(),
        data.vocab.n_relations_total(),
        model.dim,
        model.init_scale,
        cfg.seed,
    )?;
    fit_from(init, data, cfg)
}

/// [`fit`] starting from given parameters.
pub fn fit_from(init: ModelParams, data: &DataBundle, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    cfg.reg.validate(init.kind)?;
    if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| KgeError::Config(format!("thread pool: {e}")))?;
        pool.install(|| fit_inner(init, data, cfg))
    } else {
        fit_inner(init, data, cfg)
    }
}

fn fit_inner(mut params: ModelParams, data: &DataBundle, cfg: &TrainConfig) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut state = AdagradState::new(&params);
    let mut workspace = Workspace::new(&params, cfg.workers);

    let mut best = params.clone();
    let mut best_mrr = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0usize;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let objective = train_epoch(
            &mut params,
            &data.train,
            &data.weights,
            cfg,
            &mut state,
            &mut rng,
            &mut workspace,
            epoch,
        )?;
        log::debug!("epoch {epoch}: objective {objective:.6}");
        if epoch % cfg.valid_every != 0 && epoch != cfg.max_epochs {
            continue;
        }
        let report = if cfg.workers > 1 {
            evaluate_parallel(&params, &data.valid, &data.filter)?
        } else {
            evaluate(&params, &data.valid, &data.filter)?
        };
        log::info!("epoch {epoch}: objective {objective:.6} valid MRR {:.4}", report.mrr);
        history.push(HistoryRecord {
            epoch,
            objective,
            valid_mrr: report.mrr,
        });
        if report.mrr > best_mrr {
            best_mrr = report.mrr;
            best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                log::info!("early stop at epoch {epoch}");
                break;
            }
        }
    }
    if history.is_empty() {
        return Err(KgeError::Config("max_epochs must be at least 1".into()));
    }
    Ok(FitResult {
        best,
        best_epoch,
        best_valid_mrr: best_mrr,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_two_way() {
        let (l, g) = cross_entropy_loss(array![0.0, 0.0].view(), 0, 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, array![-0.5, 0.5]);
        let (l, _) = cross_entropy_loss(array![0.0, 0.0].view(), 0, 0.5).unwrap();
        assert!((l - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_prediction() {
        let (l, g) = cross_entropy_loss(array![10.0, 0.0, 0.0].view(), 0, 1.0).unwrap();
        // log(1 + 2 e^-10)
        let expect = (1.0 + 2.0 * (-10f64).exp()).ln();
        assert!((l - expect).abs() < 1e-12 * expect);
        assert!((l - 9.08e-5).abs() < 1e-7);
        assert!(g.sum().abs() < 1e-15);
    }

    #[test]
    fn non_finite_scores_rejected() {
        assert!(matches!(
            cross_entropy_loss(array![f64::NAN, 0.0].view(), 0, 1.0),
            Err(KgeError::Numeric(_))
        ));
        assert!(cross_entropy_loss(array![0.0].view(), 3, 1.0).is_err());
    }

    #[test]
    fn stable_matches_naive() {
        let s = array![1.5, -2.0, 0.25, 3.0];
        for target in 0..4 {
            let (l, _) = cross_entropy_loss(s.view(), target, 0.8).unwrap();
            let naive = 0.8 * (s.mapv(f64::exp).sum().ln() - s[target]);
            assert!((l - naive).abs() < 1e-9);
        }
        // naive overflows here, the stable form does not
        let (l, _) = cross_entropy_loss(array![1000.0, 0.0].view(), 0, 1.0).unwrap();
        assert!(l.is_finite() && l >= 0.0);
    }

    fn scalar_params(v: f64) -> ModelParams {
        let mut p = ModelParams::zeros(ModelKind::Cp, 1, 1, 1).unwrap();
        p.tables.entity[[0, 0]] = v;
        p
    }

    #[test]
    fn adagrad_first_and_second_step() {
        let mut p = scalar_params(1.0);
        let mut g = Tables::zeros_like(&p.tables);
        g.entity[[0, 0]] = 1.0;
        let mut st = AdagradState::new(&p);
        adagrad_step(&mut p, &g, &mut st, 0.1, 1e-10);
        assert!((1.0 - p.tables.entity[[0, 0]] - 0.1).abs() < 1e-9);
        let before = p.tables.entity[[0, 0]];
        adagrad_step(&mut p, &g, &mut st, 0.1, 1e-10);
        let step = before - p.tables.entity[[0, 0]];
        assert!((step - 0.1 / 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(st.sum_sq.entity[[0, 0]], 2.0);
    }

    #[test]
    fn adagrad_zero_gradient_is_noop() {
        let mut p = ModelParams::random(ModelKind::ComplEx, 3, 2, 4, 1.0, 1).unwrap();
        let before = p.clone();
        let g = Tables::zeros_like(&p.tables);
        let mut st = AdagradState::new(&p);
        adagrad_step(&mut p, &g, &mut st, 0.1, 1e-10);
        assert_eq!(p, before);
        assert!(st.sum_sq.is_zero());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
        c = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = TrainConfig {
            w0: 1.2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
