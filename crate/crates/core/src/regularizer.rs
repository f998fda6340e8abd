//! Per-triple penalties and their gradients.
//!
//! Notation below: `h`, `t` are the head and tail embeddings of a sampled
//! triple and `R` its relation. For diagonal models `h conj(R)` is the
//! elementwise product with the conjugated relation vector and norms are
//! complex-modulus norms; for RESCAL `h R` and `t R^T` are vector-matrix
//! products.
//!
//! | kind        | penalty                                                     |
//! |-------------|-------------------------------------------------------------|
//! | `Dura`      | `l * (l1 (|h|^2 + |t|^2) + l2 (|h conj(R)|^2 + |t R^T|^2))`  |
//! | `BasicDura` | `l * (|h conj(R)|^2 + |t|^2)`                               |
//! | `Fro`       | `l * (|h|^2 + |t|^2 + |R|_F^2)`                             |
//! | `N3`        | `l * (|h|_3^3 + |r|_3^3 + |t|_3^3)` (diagonal models only)  |
//! | `RegP1`     | `l * (|h conj(R) - t|_1 + |t R^T - h|_1)`                   |

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Triple;
use crate::error::{KgeError, Result};
use crate::model::{outer_add, relation_matrix_mut, Gradients, ModelKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerKind {
    Dura,
    BasicDura,
    Fro,
    N3,
    RegP1,
    None,
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegularizerKind::Dura => "DURA",
            RegularizerKind::BasicDura => "BasicDURA",
            RegularizerKind::Fro => "FRO",
            RegularizerKind::N3 => "N3",
            RegularizerKind::RegP1 => "RegP1",
            RegularizerKind::None => "None",
        })
    }
}

impl FromStr for RegularizerKind {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "dura" => Ok(RegularizerKind::Dura),
            "basicdura" => Ok(RegularizerKind::BasicDura),
            "fro" | "frobenius" => Ok(RegularizerKind::Fro),
            "n3" => Ok(RegularizerKind::N3),
            "regp1" => Ok(RegularizerKind::RegP1),
            "none" => Ok(RegularizerKind::None),
            _ => Err(KgeError::Config(format!("unknown regularizer `{s}`"))),
        }
    }
}

/// Which penalty to apply and its coefficients. `lambda1`/`lambda2` are only
/// read by DURA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        RegularizerSpec::none()
    }
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::None,
            lambda: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    pub fn dura(lambda: f64, lambda1: f64, lambda2: f64) -> Self {
        RegularizerSpec {
            kind: RegularizerKind::Dura,
            lambda,
            lambda1,
            lambda2,
        }
    }

    pub fn simple(kind: RegularizerKind, lambda: f64) -> Self {
        RegularizerSpec {
            kind,
            lambda,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    /// True when the penalty contributes nothing (kind `None` or zero weight).
    pub fn is_inactive(&self) -> bool {
        self.kind == RegularizerKind::None || self.lambda == 0.0
    }

    pub fn validate(&self, model: ModelKind) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(KgeError::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if self.kind == RegularizerKind::N3 && model == ModelKind::Rescal {
            return Err(KgeError::Unsupported(
                "N3 applies to diagonal-relation models only, not RESCAL".into(),
            ));
        }
        Ok(())
    }
}

/// Penalty value for one sampled triple.
pub fn penalty(spec: &RegularizerSpec, params: &ModelParams, triple: Triple) -> Result<f64> {
    spec.validate(params.kind)?;
    Ok(match spec.kind {
        RegularizerKind::None => 0.0,
        _ if params.kind.is_diagonal() => diagonal_penalty(spec, params, triple, None),
        _ => rescal_penalty(spec, params, triple, None),
    })
}

/// Adds the penalty gradient for one sampled triple into `grads`.
pub fn penalty_gradients(
    spec: &RegularizerSpec,
    params: &ModelParams,
    triple: Triple,
    grads: &mut Gradients,
) -> Result<()> {
    accumulate_penalty_gradients(spec, params, triple, 1.0, grads).map(|_| ())
}

/// Adds `scale` times the penalty gradient into `grads` and returns the
/// (unscaled) penalty value.
pub fn accumulate_penalty_gradients(
    spec: &RegularizerSpec,
    params: &ModelParams,
    triple: Triple,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    spec.validate(params.kind)?;
    Ok(match spec.kind {
        RegularizerKind::None => 0.0,
        _ if params.kind.is_diagonal() => {
            diagonal_penalty(spec, params, triple, Some((scale, grads)))
        }
        _ => rescal_penalty(spec, params, triple, Some((scale, grads))),
    })
}

/// Diagonal models. A CP coordinate is a complex number with no imaginary
/// part, so one code path covers both CP and ComplEx.
fn diagonal_penalty(
    spec: &RegularizerSpec,
    params: &ModelParams,
    triple: Triple,
    grads: Option<(f64, &mut Gradients)>,
) -> f64 {
    let complex = params.kind == ModelKind::ComplEx;
    let m = if complex { params.dim / 2 } else { params.dim };
    let (hv, rv, tv) = (
        params.head(triple.head),
        params.relation(triple.relation),
        params.tail(triple.tail),
    );
    let im = |v: &ArrayView1<f64>, c: usize| if complex { v[c + m] } else { 0.0 };

    let mut gh = Array1::<f64>::zeros(params.dim);
    let mut gr = Array1::<f64>::zeros(params.dim);
    let mut gt = Array1::<f64>::zeros(params.dim);
    let (l, l1, l2) = (spec.lambda, spec.lambda1, spec.lambda2);
    let mut value = 0.0;

    for c in 0..m {
        let (hr, hi) = (hv[c], im(&hv, c));
        let (rr, ri) = (rv[c], im(&rv, c));
        let (tr, ti) = (tv[c], im(&tv, c));
        let h2 = hr * hr + hi * hi;
        let r2 = rr * rr + ri * ri;
        let t2 = tr * tr + ti * ti;

        // per-coordinate partials, real then imaginary component
        let (dhr, dhi, drr, dri, dtr, dti);
        match spec.kind {
            RegularizerKind::Dura => {
                value += l * (l1 * (h2 + t2) + l2 * r2 * (h2 + t2));
                let hc = 2.0 * l * (l1 + l2 * r2);
                let rc = 2.0 * l * l2 * (h2 + t2);
                (dhr, dhi, drr, dri, dtr, dti) = (hc * hr, hc * hi, rc * rr, rc * ri, hc * tr, hc * ti);
            }
            RegularizerKind::BasicDura => {
                value += l * (r2 * h2 + t2);
                let hc = 2.0 * l * r2;
                let rc = 2.0 * l * h2;
                (dhr, dhi, drr, dri, dtr, dti) =
                    (hc * hr, hc * hi, rc * rr, rc * ri, 2.0 * l * tr, 2.0 * l * ti);
            }
            RegularizerKind::Fro => {
                value += l * (h2 + r2 + t2);
                let k = 2.0 * l;
                (dhr, dhi, drr, dri, dtr, dti) = (k * hr, k * hi, k * rr, k * ri, k * tr, k * ti);
            }
            RegularizerKind::N3 => {
                let (hm, rm, tm) = (h2.sqrt(), r2.sqrt(), t2.sqrt());
                value += l * (h2 * hm + r2 * rm + t2 * tm);
                let k = 3.0 * l;
                (dhr, dhi, drr, dri, dtr, dti) = (
                    k * hm * hr,
                    k * hm * hi,
                    k * rm * rr,
                    k * rm * ri,
                    k * tm * tr,
                    k * tm * ti,
                );
            }
            RegularizerKind::RegP1 => {
                // first residual: h * conj(r) - t
                let (ar, ai) = (hr * rr + hi * ri - tr, hi * rr - hr * ri - ti);
                // second residual: t * r - h
                let (br, bi) = (tr * rr - ti * ri - hr, tr * ri + ti * rr - hi);
                let (an, bn) = (ar.hypot(ai), br.hypot(bi));
                value += l * (an + bn);
                let (ur, ui) = unit(ar, ai, an);
                let (vr, vi) = unit(br, bi, bn);
                dhr = l * (ur * rr - ui * ri - vr);
                dhi = l * (ur * ri + ui * rr - vi);
                drr = l * (ur * hr + ui * hi + vr * tr + vi * ti);
                dri = l * (ur * hi - ui * hr - vr * ti + vi * tr);
                dtr = l * (-ur + vr * rr + vi * ri);
                dti = l * (-ui - vr * ri + vi * rr);
            }
            RegularizerKind::None => unreachable!(),
        }
        gh[c] = dhr;
        gr[c] = drr;
        gt[c] = dtr;
        if complex {
            gh[c + m] = dhi;
            gr[c + m] = dri;
            gt[c + m] = dti;
        }
    }

    if let Some((scale, grads)) = grads {
        grads.entity.row_mut(triple.head).scaled_add(scale, &gh);
        grads.relation.row_mut(triple.relation).scaled_add(scale, &gr);
        grads.tail_table_mut().row_mut(triple.tail).scaled_add(scale, &gt);
    }
    value
}

/// `z / |z|`, with the subgradient 0 taken at the origin.
fn unit(re: f64, im: f64, norm: f64) -> (f64, f64) {
    if norm > 0.0 {
        (re / norm, im / norm)
    } else {
        (0.0, 0.0)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn rescal_penalty(
    spec: &RegularizerSpec,
    params: &ModelParams,
    triple: Triple,
    grads: Option<(f64, &mut Gradients)>,
) -> f64 {
    let (hv, tv) = (params.head(triple.head), params.tail(triple.tail));
    let rm = params.relation_matrix(triple.relation);
    let (l, l1, l2) = (spec.lambda, spec.lambda1, spec.lambda2);
    let d = params.dim;

    // hR (row vector) and tR^T = (R t)^T
    let hr = rm.t().dot(&hv);
    let tr = rm.dot(&tv);
    let sq = |v: &ArrayView1<f64>| v.dot(v);

    let mut gh = Array1::<f64>::zeros(d);
    let mut gt = Array1::<f64>::zeros(d);
    // gradient wrt R as a sum of rank-one terms: coef * a b^T
    let mut outer: Vec<(f64, Array1<f64>, Array1<f64>)> = Vec::new();
    let mut dense_r: Option<f64> = None;

    let value = match spec.kind {
        RegularizerKind::Dura => {
            gh.scaled_add(2.0 * l * l1, &hv);
            gh.scaled_add(2.0 * l * l2, &rm.dot(&hr));
            gt.scaled_add(2.0 * l * l1, &tv);
            gt.scaled_add(2.0 * l * l2, &rm.t().dot(&tr));
            outer.push((2.0 * l * l2, hv.to_owned(), hr.clone()));
            outer.push((2.0 * l * l2, tr.clone(), tv.to_owned()));
            l * (l1 * (sq(&hv) + sq(&tv)) + l2 * (hr.dot(&hr) + tr.dot(&tr)))
        }
        RegularizerKind::BasicDura => {
            gh.scaled_add(2.0 * l, &rm.dot(&hr));
            gt.scaled_add(2.0 * l, &tv);
            outer.push((2.0 * l, hv.to_owned(), hr.clone()));
            l * (hr.dot(&hr) + sq(&tv))
        }
        RegularizerKind::Fro => {
            gh.scaled_add(2.0 * l, &hv);
            gt.scaled_add(2.0 * l, &tv);
            dense_r = Some(2.0 * l);
            l * (sq(&hv) + sq(&tv) + rm.iter().map(|x| x * x).sum::<f64>())
        }
        RegularizerKind::RegP1 => {
            let res1 = &hr - &tv;
            let res2 = &tr - &hv;
            let s1 = res1.mapv(sign);
            let s2 = res2.mapv(sign);
            gh.scaled_add(l, &rm.dot(&s1));
            gh.scaled_add(-l, &s2);
            gt.scaled_add(-l, &s1);
            gt.scaled_add(l, &rm.t().dot(&s2));
            outer.push((l, hv.to_owned(), s1));
            outer.push((l, s2, tv.to_owned()));
            l * (res1.mapv(f64::abs).sum() + res2.mapv(f64::abs).sum())
        }
        RegularizerKind::N3 | RegularizerKind::None => unreachable!("rejected by validate"),
    };

    if let Some((scale, grads)) = grads {
        grads.entity.row_mut(triple.head).scaled_add(scale, &gh);
        grads.tail_table_mut().row_mut(triple.tail).scaled_add(scale, &gt);
        if let Some(k) = dense_r {
            grads
                .relation
                .row_mut(triple.relation)
                .scaled_add(scale * k, &params.relation(triple.relation));
        }
        let mut gr = relation_matrix_mut(&mut grads.relation, triple.relation, d);
        for (coef, a, b) in &outer {
            outer_add(&mut gr, scale * coef, a.view(), b.view());
        }
    }
    value
}

/// DURA summed over every (entity, relation, entity) combination:
/// `|E| * sum_j (|H conj(R_j)|_F^2 + |T|_F^2 + |T R_j^T|_F^2 + |H|_F^2)`.
pub fn unweighted_dura(params: &ModelParams) -> f64 {
    let n_ent = params.n_entities() as f64;
    let head = params.head_table();
    let tail = params.tail_table();
    let fro = |a: &ndarray::Array2<f64>| a.iter().map(|x| x * x).sum::<f64>();
    let (h_norm, t_norm) = (fro(head), fro(tail));

    let mut total = 0.0;
    for j in 0..params.n_relations() {
        let (hr, tr) = match params.kind {
            ModelKind::Rescal => {
                let rm = params.relation_matrix(j);
                (fro(&head.dot(&rm)), fro(&tail.dot(&rm.t())))
            }
            kind => {
                // |x_c|^2 |r_c|^2 summed over rows and coordinates
                let r2 = coordinate_modulus_sq(params.relation(j), kind == ModelKind::ComplEx);
                let weighted = |table: &ndarray::Array2<f64>| {
                    table
                        .rows()
                        .into_iter()
                        .map(|row| {
                            coordinate_modulus_sq(row, kind == ModelKind::ComplEx)
                                .iter()
                                .zip(r2.iter())
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                };
                (weighted(head), weighted(tail))
            }
        };
        total += hr + t_norm + tr + h_norm;
    }
    n_ent * total
}

fn coordinate_modulus_sq(row: ArrayView1<'_, f64>, complex: bool) -> Vec<f64> {
    if complex {
        let m = row.len() / 2;
        (0..m).map(|c| row[c] * row[c] + row[c + m] * row[c + m]).collect()
    } else {
        row.iter().map(|x| x * x).collect()
    }
}
