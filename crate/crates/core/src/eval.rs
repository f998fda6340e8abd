//! Filtered entity ranking: MRR and Hits@N.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FilterIndex, Triple, TripleStore};
use crate::error::{KgeError, Result};
use crate::model::{score_all_tails, ModelParams};

/// Cut-offs reported for Hits@N.
pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

/// Flat serialized form of a [`RankingReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_queries: usize,
}

impl RankingReport {
    /// Aggregates filtered ranks (each >= 1).
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(KgeError::Empty("no ranking queries".into()));
        }
        let n = ranks.len() as f64;
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
        let hits = HITS_AT
            .iter()
            .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
            .collect();
        Ok(RankingReport {
            mrr,
            hits,
            n_queries: ranks.len(),
        })
    }

    pub fn hits_at(&self, n: usize) -> f64 {
        self.hits.get(&n).copied().unwrap_or(f64::NAN)
    }

    pub fn to_record(&self) -> RankingRecord {
        RankingRecord {
            mrr: self.mrr,
            hits1: self.hits_at(1),
            hits3: self.hits_at(3),
            hits10: self.hits_at(10),
            n_queries: self.n_queries,
        }
    }

    /// One-line JSON record.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("report serializes")
    }
}

impl From<RankingRecord> for RankingReport {
    fn from(r: RankingRecord) -> Self {
        RankingReport {
            mrr: r.mrr,
            hits: [(1, r.hits1), (3, r.hits3), (10, r.hits10)].into_iter().collect(),
            n_queries: r.n_queries,
        }
    }
}

impl fmt::Display for RankingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10}", "metric", "value")?;
        writeln!(f, "{:<10} {:>10.4}", "MRR", self.mrr)?;
        for (k, v) in &self.hits {
            writeln!(f, "{:<10} {:>10.4}", format!("Hits@{k}"), v)?;
        }
        write!(f, "{:<10} {:>10}", "queries", self.n_queries)
    }
}

/// Rank of `true_tail` given a precomputed score vector.
///
/// `1 + #{k : s_k > s_true, k not a known-true tail other than true_tail}`.
/// Ties never worsen the rank.
pub fn rank_from_scores(
    scores: ArrayView1<'_, f64>,
    true_tail: usize,
    known_tails: &std::collections::BTreeSet<usize>,
) -> usize {
    let target = scores[true_tail];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(k, &s)| s > target && !known_tails.contains(&k))
        .count()
}

pub fn filtered_rank(
    params: &ModelParams,
    h: usize,
    r: usize,
    true_tail: usize,
    filter: &FilterIndex,
) -> Result<usize> {
    let known = filter
        .tails(h, r)
        .filter(|s| s.contains(&true_tail))
        .ok_or_else(|| {
            KgeError::Contract(format!(
                "triple ({h}, {r}, {true_tail}) is missing from the filter index"
            ))
        })?;
    let scores = score_all_tails(params, h, r);
    Ok(rank_from_scores(scores.view(), true_tail, known))
}

/// Filtered ranks of every triple in `test`, in order.
pub fn ranks(params: &ModelParams, test: &TripleStore, filter: &FilterIndex) -> Result<Vec<usize>> {
    test.triples
        .iter()
        .map(|t: &Triple| filtered_rank(params, t.head, t.relation, t.tail, filter))
        .collect()
}

/// Evaluates every triple of `test` as a tail query. Pass the
/// reciprocal-augmented split so head queries are covered too.
pub fn evaluate(params: &ModelParams, test: &TripleStore, filter: &FilterIndex) -> Result<RankingReport> {
    if test.is_empty() {
        return Err(KgeError::Empty(format!("{} split has no triples", test.split)));
    }
    RankingReport::from_ranks(&ranks(params, test, filter)?)
}

/// Like [`evaluate`], ranking queries on the current rayon pool. Ranks are
/// collected in query order, so the report is identical to the sequential one.
pub fn evaluate_parallel(
    params: &ModelParams,
    test: &TripleStore,
    filter: &FilterIndex,
) -> Result<RankingReport> {
    if test.is_empty() {
        return Err(KgeError::Empty(format!("{} split has no triples", test.split)));
    }
    let ranks = test
        .triples
        .par_iter()
        .map(|t| filtered_rank(params, t.head, t.relation, t.tail, filter))
        .collect::<Result<Vec<_>>>()?;
    RankingReport::from_ranks(&ranks)
}

/// Evaluates with at most `workers` threads (1 = sequential).
pub fn evaluate_with_workers(
    params: &ModelParams,
    test: &TripleStore,
    filter: &FilterIndex,
    workers: usize,
) -> Result<RankingReport> {
    if workers <= 1 {
        return evaluate(params, test, filter);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| KgeError::Config(format!("thread pool: {e}")))?;
    pool.install(|| evaluate_parallel(params, test, filter))
}
