//! Threshold sparsification of entity embeddings and the sparsity-vs-MRR
//! sweep.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{FilterIndex, TripleStore};
use crate::error::{KgeError, Result};
use crate::eval::evaluate_with_workers;
use crate::model::ModelParams;

/// Fraction of entries with `|x| < threshold` (strict).
pub fn lambda_sparsity(e: &Array2<f64>, threshold: f64) -> f64 {
    lambda_sparsity_of(e.iter().copied(), threshold)
}

fn lambda_sparsity_of(values: impl Iterator<Item = f64>, threshold: f64) -> f64 {
    let (mut below, mut n) = (0usize, 0usize);
    for x in values {
        n += 1;
        if x.abs() < threshold {
            below += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        below as f64 / n as f64
    }
}

/// Smallest threshold on the grid of absolute entry values (plus one value
/// just above the maximum) whose λ-sparsity reaches `target`. Returns
/// `(threshold, achieved)`.
pub fn threshold_for_sparsity(e: &Array2<f64>, target: f64) -> Result<(f64, f64)> {
    threshold_for_values(e.iter().copied().collect(), target)
}

fn threshold_for_values(values: Vec<f64>, target: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&target) {
        return Err(KgeError::Config(format!("sparsity target {target} outside [0, 1]")));
    }
    let n = values.len();
    let mut abs: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    // number of entries that must fall strictly below the threshold
    let needed = ((target * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if needed == 0 || n == 0 {
        return Ok((0.0, 0.0));
    }
    let threshold = if needed >= n {
        abs[n - 1].next_up()
    } else {
        // first value strictly greater than the needed-th smallest
        let pivot = abs[needed - 1];
        match abs[needed..].iter().find(|&&v| v > pivot) {
            Some(&v) => v,
            None => pivot.next_up(),
        }
    };
    let achieved = lambda_sparsity_of(values.into_iter(), threshold);
    Ok((threshold, achieved))
}

/// Zeroes every entry with `|x| < threshold`.
pub fn sparsify(e: &Array2<f64>, threshold: f64) -> Array2<f64> {
    e.mapv(|x| if x.abs() < threshold { 0.0 } else { x })
}

/// Numbers needed to hold `e` in CSR form: `2 * nnz + rows + 1`.
pub fn csr_storage_numbers(e: &Array2<f64>) -> usize {
    let nnz = e.iter().filter(|&&x| x != 0.0).count();
    2 * nnz + e.nrows() + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub target: f64,
    pub threshold: f64,
    pub achieved: f64,
    pub mrr: f64,
    pub storage_numbers: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsitySweep {
    pub points: Vec<SweepPoint>,
}

impl SparsitySweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,threshold,achieved,mrr,storage_numbers\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.target, p.threshold, p.achieved, p.mrr, p.storage_numbers
            ));
        }
        out
    }
}

fn entity_values(params: &ModelParams) -> Vec<f64> {
    let mut v: Vec<f64> = params.tables.entity.iter().copied().collect();
    if let Some(t) = &params.tables.tail {
        v.extend(t.iter().copied());
    }
    v
}

/// Sparsifies the entity table(s) with one threshold; relations untouched.
pub fn sparsify_entities(params: &ModelParams, threshold: f64) -> ModelParams {
    let mut out = params.clone();
    out.tables.entity = sparsify(&params.tables.entity, threshold);
    if let Some(t) = &params.tables.tail {
        out.tables.tail = Some(sparsify(t, threshold));
    }
    out
}

/// CSR storage summed over the entity table(s).
pub fn entity_storage_numbers(params: &ModelParams) -> usize {
    csr_storage_numbers(&params.tables.entity)
        + params.tables.tail.as_ref().map_or(0, csr_storage_numbers)
}

/// Evaluates copies of `params` with entity tables thresholded to each
/// target sparsity. Targets are processed in ascending order; `params`
/// itself is never modified.
pub fn sparsity_mrr_sweep(
    params: &ModelParams,
    test: &TripleStore,
    filter: &FilterIndex,
    targets: &[f64],
    workers: usize,
) -> Result<SparsitySweep> {
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values = entity_values(params);
    let mut points = Vec::with_capacity(sorted.len());
    for target in sorted {
        let (threshold, achieved) = threshold_for_values(values.clone(), target)?;
        let sparse = sparsify_entities(params, threshold);
        let report = evaluate_with_workers(&sparse, test, filter, workers)?;
        points.push(SweepPoint {
            target,
            threshold,
            achieved,
            mrr: report.mrr,
            storage_numbers: entity_storage_numbers(&sparse),
        });
    }
    Ok(SparsitySweep { points })
}
