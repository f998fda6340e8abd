//! Embedding parameters and score functions for CP, ComplEx and RESCAL.
//!
//! Every model scores a triple as `Re(conj(h) R t^T)`:
//!
//! * CP keeps separate head-role and tail-role entity tables and a diagonal
//!   real relation (stored as a vector).
//! * ComplEx shares one entity table. Rows are complex vectors stored
//!   half-split: the first `D/2` columns hold real parts, the last `D/2`
//!   imaginary parts. Relations are diagonal complex.
//! * RESCAL shares one real entity table; each relation is a full `D x D`
//!   matrix stored row-major in one row of the relation table.
//!
//! Scoring all tails of a query builds one transformed query vector `q` and
//! multiplies it against the tail table, so `s_k = <q, t_k>`.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Vocab;
use crate::error::{KgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cp,
    ComplEx,
    Rescal,
}

impl ModelKind {
    pub fn code(self) -> u8 {
        match self {
            ModelKind::Cp => 0,
            ModelKind::ComplEx => 1,
            ModelKind::Rescal => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Cp),
            1 => Some(ModelKind::ComplEx),
            2 => Some(ModelKind::Rescal),
            _ => None,
        }
    }

    /// True when relations are diagonal (CP, ComplEx).
    pub fn is_diagonal(self) -> bool {
        !matches!(self, ModelKind::Rescal)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cp => "CP",
            ModelKind::ComplEx => "ComplEx",
            ModelKind::Rescal => "RESCAL",
        })
    }
}

impl FromStr for ModelKind {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(ModelKind::Cp),
            "complex" => Ok(ModelKind::ComplEx),
            "rescal" => Ok(ModelKind::Rescal),
            _ => Err(KgeError::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

/// The parameter tensors of one model. Also used, with identical shapes, as
/// a gradient buffer and as optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    /// Shared entity table, or the head-role table for CP.
    pub entity: Array2<f64>,
    /// Tail-role table; present for CP only.
    pub tail: Option<Array2<f64>>,
    /// `|R| x D` for diagonal models, `|R| x D*D` for RESCAL.
    pub relation: Array2<f64>,
}

impl Tables {
    pub fn zeros_like(other: &Tables) -> Tables {
        Tables {
            entity: Array2::zeros(other.entity.raw_dim()),
            tail: other.tail.as_ref().map(|t| Array2::zeros(t.raw_dim())),
            relation: Array2::zeros(other.relation.raw_dim()),
        }
    }

    pub fn arrays(&self) -> impl Iterator<Item = &Array2<f64>> {
        std::iter::once(&self.entity)
            .chain(self.tail.as_ref())
            .chain(std::iter::once(&self.relation))
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        std::iter::once(&mut self.entity)
            .chain(self.tail.as_mut())
            .chain(std::iter::once(&mut self.relation))
    }

    pub fn fill(&mut self, value: f64) {
        for a in self.arrays_mut() {
            a.fill(value);
        }
    }

    pub fn add_assign(&mut self, other: &Tables) {
        for (a, b) in self.arrays_mut().zip(other.arrays()) {
            *a += b;
        }
    }

    pub fn n_values(&self) -> usize {
        self.arrays().map(|a| a.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.arrays().all(|a| a.iter().all(|&x| x == 0.0))
    }

    /// Row of the table that plays the tail role.
    pub fn tail_table(&self) -> &Array2<f64> {
        self.tail.as_ref().unwrap_or(&self.entity)
    }

    pub fn tail_table_mut(&mut self) -> &mut Array2<f64> {
        self.tail.as_mut().unwrap_or(&mut self.entity)
    }
}

/// Alias used where a [`Tables`] value holds derivatives.
pub type Gradients = Tables;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dim: usize,
    pub tables: Tables,
}

impl ModelParams {
    /// All-zero parameters of the right shapes.
    pub fn zeros(kind: ModelKind, n_entities: usize, n_relations: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(KgeError::Config("embedding dimension must be positive".into()));
        }
        if kind == ModelKind::ComplEx && dim % 2 != 0 {
            return Err(KgeError::Config(format!(
                "ComplEx needs an even dimension, got {dim}"
            )));
        }
        let rel_cols = match kind {
            ModelKind::Rescal => dim * dim,
            _ => dim,
        };
        Ok(ModelParams {
            kind,
            dim,
            tables: Tables {
                entity: Array2::zeros((n_entities, dim)),
                tail: (kind == ModelKind::Cp).then(|| Array2::zeros((n_entities, dim))),
                relation: Array2::zeros((n_relations, rel_cols)),
            },
        })
    }

    /// Gaussian initialization with standard deviation `init_scale`.
    /// Tables are filled in order entity, tail, relation, row-major.
    pub fn random(
        kind: ModelKind,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(init_scale >= 0.0 && init_scale.is_finite()) {
            return Err(KgeError::Config(format!("invalid init scale {init_scale}")));
        }
        let mut params = Self::zeros(kind, n_entities, n_relations, dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for table in params.tables.arrays_mut() {
            for x in table.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = init_scale * z;
            }
        }
        Ok(params)
    }

    pub fn n_entities(&self) -> usize {
        self.tables.entity.nrows()
    }

    pub fn n_relations(&self) -> usize {
        self.tables.relation.nrows()
    }

    pub fn head_table(&self) -> &Array2<f64> {
        &self.tables.entity
    }

    pub fn tail_table(&self) -> &Array2<f64> {
        self.tables.tail_table()
    }

    pub fn head(&self, e: usize) -> ArrayView1<'_, f64> {
        self.tables.entity.row(e)
    }

    pub fn tail(&self, e: usize) -> ArrayView1<'_, f64> {
        self.tail_table().row(e)
    }

    pub fn relation(&self, r: usize) -> ArrayView1<'_, f64> {
        self.tables.relation.row(r)
    }

    /// RESCAL relation as a `D x D` matrix view.
    pub fn relation_matrix(&self, r: usize) -> ArrayView2<'_, f64> {
        debug_assert_eq!(self.kind, ModelKind::Rescal);
        self.tables
            .relation
            .row(r)
            .into_shape_with_order((self.dim, self.dim))
            .expect("relation row holds D*D values")
    }

    fn check_query(&self, h: usize, r: usize) {
        assert!(h < self.n_entities(), "head {h} out of bounds");
        assert!(r < self.n_relations(), "relation {r} out of bounds");
    }
}

/// Draws initial parameters sized for an (augmented) vocabulary.
pub fn init_params(
    kind: ModelKind,
    vocab: &Vocab,
    dim: usize,
    init_scale: f64,
    seed: u64,
) -> Result<ModelParams> {
    ModelParams::random(
        kind,
        vocab.n_entities(),
        vocab.n_relations_total(),
        dim,
        init_scale,
        seed,
    )
}

/// Score of a single triple, evaluated coordinate by coordinate.
pub fn score_triple(params: &ModelParams, h: usize, r: usize, t: usize) -> f64 {
    params.check_query(h, r);
    let (hv, rv, tv) = (params.head(h), params.relation(r), params.tail(t));
    match params.kind {
        ModelKind::Cp => (0..params.dim).map(|d| hv[d] * rv[d] * tv[d]).sum(),
        ModelKind::ComplEx => {
            let m = params.dim / 2;
            (0..m)
                .map(|c| {
                    // conj(h) * r
                    let (hr, hi) = (hv[c], -hv[c + m]);
                    let (ar, ai) = (hr * rv[c] - hi * rv[c + m], hr * rv[c + m] + hi * rv[c]);
                    ar * tv[c] - ai * tv[c + m]
                })
                .sum()
        }
        ModelKind::Rescal => {
            let rm = params.relation_matrix(r);
            let mut total = 0.0;
            for i in 0..params.dim {
                for j in 0..params.dim {
                    total += hv[i] * rm[[i, j]] * tv[j];
                }
            }
            total
        }
    }
}

/// The vector `q` with `score(h, r, k) = <q, t_k>`.
pub fn query_vector(params: &ModelParams, h: usize, r: usize) -> Array1<f64> {
    params.check_query(h, r);
    let hv = params.head(h);
    match params.kind {
        ModelKind::Cp => &hv * &params.relation(r),
        ModelKind::ComplEx => {
            let m = params.dim / 2;
            let rv = params.relation(r);
            let mut q = Array1::zeros(params.dim);
            for c in 0..m {
                let (hr, hi, rr, ri) = (hv[c], hv[c + m], rv[c], rv[c + m]);
                let a = hr * rr + hi * ri;
                let b = hr * ri - hi * rr;
                q[c] = a;
                q[c + m] = -b;
            }
            q
        }
        ModelKind::Rescal => params.relation_matrix(r).t().dot(&hv),
    }
}

/// Scores of `(h, r, k)` for every entity `k`.
pub fn score_all_tails(params: &ModelParams, h: usize, r: usize) -> Array1<f64> {
    let q = query_vector(params, h, r);
    params.tail_table().dot(&q)
}

/// Back-propagates `dl_dscores` (one entry per candidate tail) through
/// [`score_all_tails`], adding into `grads`.
pub fn accumulate_score_gradients(
    params: &ModelParams,
    h: usize,
    r: usize,
    dl_dscores: ArrayView1<'_, f64>,
    grads: &mut Gradients,
) {
    assert_eq!(dl_dscores.len(), params.n_entities());
    if dl_dscores.iter().all(|&g| g == 0.0) {
        return;
    }
    let q = query_vector(params, h, r);

    // dL/dq = sum_k g_k t_k, and dL/dt_k = g_k q
    let dq = params.tail_table().t().dot(&dl_dscores);
    {
        let tail_grads = grads.tail_table_mut();
        for (k, &g) in dl_dscores.iter().enumerate() {
            if g != 0.0 {
                tail_grads.row_mut(k).scaled_add(g, &q);
            }
        }
    }

    let hv = params.head(h);
    match params.kind {
        ModelKind::Cp => {
            let rv = params.relation(r);
            grads.entity.row_mut(h).scaled_add(1.0, &(&dq * &rv));
            grads.relation.row_mut(r).scaled_add(1.0, &(&dq * &hv));
        }
        ModelKind::ComplEx => {
            let m = params.dim / 2;
            let rv = params.relation(r);
            let mut gh = Array1::zeros(params.dim);
            let mut gr = Array1::zeros(params.dim);
            for c in 0..m {
                let (hr, hi, rr, ri) = (hv[c], hv[c + m], rv[c], rv[c + m]);
                // q = [a, -b]; a = hr rr + hi ri, b = hr ri - hi rr
                let (ga, gb) = (dq[c], -dq[c + m]);
                gh[c] = ga * rr + gb * ri;
                gh[c + m] = ga * ri - gb * rr;
                gr[c] = ga * hr - gb * hi;
                gr[c + m] = ga * hi + gb * hr;
            }
            grads.entity.row_mut(h).scaled_add(1.0, &gh);
            grads.relation.row_mut(r).scaled_add(1.0, &gr);
        }
        ModelKind::Rescal => {
            let rm = params.relation_matrix(r);
            let gh = rm.dot(&dq);
            grads.entity.row_mut(h).scaled_add(1.0, &gh);
            let mut gr = relation_matrix_mut(&mut grads.relation, r, params.dim);
            outer_add(&mut gr, 1.0, hv, dq.view());
        }
    }
}

pub(crate) fn relation_matrix_mut(
    relation: &mut Array2<f64>,
    r: usize,
    dim: usize,
) -> ndarray::ArrayViewMut2<'_, f64> {
    relation
        .row_mut(r)
        .into_shape_with_order((dim, dim))
        .expect("relation row holds D*D values")
}

/// `m += alpha * a b^T`
pub(crate) fn outer_add(
    m: &mut ndarray::ArrayViewMut2<'_, f64>,
    alpha: f64,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) {
    for (mut row, &ai) in m.axis_iter_mut(Axis(0)).zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(alpha * ai, &b);
        }
    }
}

/// Splits a half-split complex row into its real and imaginary halves.
pub fn complex_halves(row: ArrayView1<'_, f64>) -> (ArrayView1<'_, f64>, ArrayView1<'_, f64>) {
    let m = row.len() / 2;
    (row.slice_move(s![..m]), row.slice_move(s![m..]))
}
