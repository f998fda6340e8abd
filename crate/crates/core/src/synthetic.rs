//! Synthetic knowledge graphs with known low-rank structure.
//!
//! Entities get random latent factors `a_e` (dimension `rank`) and each
//! relation a random `rank x rank` core `W_j`. For every relation the
//! `density` fraction of (head, tail) pairs with the largest
//! `a_h W_j a_t^T` become true triples, which are then shuffled and split.
//! Valid and test triples mentioning an entity or relation absent from the
//! train split are dropped, so the splits load cleanly from files.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Split, Triple, TripleStore, Vocab};
use crate::error::{KgeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    pub rank: usize,
    /// Fraction of (head, tail) pairs that are true, per relation.
    pub density: f64,
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_entities: 200,
            n_relations: 6,
            rank: 4,
            density: 0.01,
            train_fraction: 0.8,
            valid_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Raw (non-augmented) splits plus the vocabulary naming every entity.
#[derive(Debug, Clone)]
pub struct SyntheticKg {
    pub vocab: Vocab,
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticKg> {
    if cfg.n_entities < 2 || cfg.n_relations == 0 || cfg.rank == 0 {
        return Err(KgeError::Config("synthetic graph needs >= 2 entities, >= 1 relation, rank >= 1".into()));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0)
        || cfg.train_fraction <= 0.0
        || cfg.valid_fraction < 0.0
        || cfg.train_fraction + cfg.valid_fraction > 1.0
    {
        return Err(KgeError::Config("invalid synthetic density or split fractions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors = gaussian(cfg.n_entities, cfg.rank, &mut rng);
    let n = cfg.n_entities;
    let per_relation = ((cfg.density * (n * n) as f64).round() as usize).max(1);

    let mut triples = Vec::with_capacity(per_relation * cfg.n_relations);
    for r in 0..cfg.n_relations {
        let core = gaussian(cfg.rank, cfg.rank, &mut rng);
        let scores = factors.dot(&core).dot(&factors.t());
        let mut pairs: Vec<(f64, usize, usize)> = scores
            .indexed_iter()
            .map(|((h, t), &s)| (s, h, t))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        triples.extend(pairs[..per_relation].iter().map(|&(_, h, t)| Triple::new(h, r, t)));
    }
    triples.shuffle(&mut rng);

    let total = triples.len();
    let n_train = (cfg.train_fraction * total as f64).round() as usize;
    let n_valid = (cfg.valid_fraction * total as f64).round() as usize;
    let mut test = triples.split_off((n_train + n_valid).min(total));
    let mut valid = triples.split_off(n_train.min(triples.len()));
    let mut seen_ent = vec![false; n];
    let mut seen_rel = vec![false; cfg.n_relations];
    for t in &triples {
        seen_ent[t.head] = true;
        seen_ent[t.tail] = true;
        seen_rel[t.relation] = true;
    }
    let known = |t: &Triple| seen_ent[t.head] && seen_ent[t.tail] && seen_rel[t.relation];
    valid.retain(known);
    test.retain(known);

    let vocab = Vocab::from_names(
        (0..n).map(|e| format!("e{e}")).collect(),
        (0..cfg.n_relations).map(|r| format!("r{r}")).collect(),
        false,
    )?;
    Ok(SyntheticKg {
        vocab,
        train: TripleStore::new(Split::Train, triples),
        valid: TripleStore::new(Split::Valid, valid),
        test: TripleStore::new(Split::Test, test),
    })
}

impl SyntheticKg {
    /// Writes `train.tsv`, `valid.tsv` and `test.tsv` into `dir`.
    pub fn write_tsv(&self, dir: &std::path::Path) -> Result<()> {
        for store in [&self.train, &self.valid, &self.test] {
            let path = dir.join(format!("{}.tsv", store.split));
            let text: String = store
                .iter()
                .map(|t| {
                    format!(
                        "{}\t{}\t{}\n",
                        self.vocab.entity_names()[t.head],
                        self.vocab.relation_names()[t.relation],
                        self.vocab.entity_names()[t.tail]
                    )
                })
                .collect();
            std::fs::write(&path, text).map_err(|e| KgeError::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sizes_and_disjoint_splits() {
        let kg = generate(&SyntheticConfig::default()).unwrap();
        let total = kg.train.len() + kg.valid.len() + kg.test.len();
        assert_eq!(kg.train.len(), 1920);
        assert!(kg.valid.len() <= 240 && kg.valid.len() > 200);
        assert!(kg.test.len() <= 240 && kg.test.len() > 200);
        let mut in_train = HashSet::new();
        for t in kg.train.iter() {
            in_train.insert(t.head);
            in_train.insert(t.tail);
        }
        for t in kg.valid.iter().chain(kg.test.iter()) {
            assert!(in_train.contains(&t.head) && in_train.contains(&t.tail));
        }
        let all: HashSet<_> = kg.train.iter().chain(kg.valid.iter()).chain(kg.test.iter()).collect();
        assert_eq!(all.len(), total);
    }

    #[test]
    fn seeded() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.test, b.test);
    }
}
