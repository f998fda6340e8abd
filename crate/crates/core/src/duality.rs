//! Balance conditions and the rebalancing construction for CP factors.
//!
//! For `X_j = H diag(r_j) T^T`, with column norms `a_d = |h_:d|`,
//! `b_d = |r_:d|`, `c_d = |t_:d|` and `n = |R|`,
//!
//! ```text
//! sum_j (|H R_j|^2 + |T|^2 + |T R_j^T|^2 + |H|^2)
//!     = sum_d (a^2 b^2 + n c^2 + c^2 b^2 + n a^2)
//!     >= 4 sqrt(n) sum_d a b c
//! ```
//!
//! by AM-GM on each half. Equality needs `a b = sqrt(n) c` and
//! `c b = sqrt(n) a` for every `d`, i.e. `b = sqrt(n)` and `a = c`.
//! Rescaling column `d` by positive `(alpha, beta, gamma)` with
//! `alpha beta gamma = 1` keeps every score and can always reach that point.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{KgeError, Result};
use crate::model::{ModelKind, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNorms {
    pub head: f64,
    pub relation: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub n_relations: usize,
    pub columns: Vec<ColumnNorms>,
    /// `| |h_:d| |r_:d| - sqrt(|R|) |t_:d| |`
    pub condition1_residuals: Vec<f64>,
    /// `| |t_:d| |r_:d| - sqrt(|R|) |h_:d| |`
    pub condition2_residuals: Vec<f64>,
    /// Four-term DURA sum over relations (no `|E|` factor).
    pub dura_value: f64,
    /// `4 sqrt(|R|) sum_d |h_:d| |r_:d| |t_:d|`
    pub bound_value: f64,
}

impl BalanceReport {
    pub fn max_condition1(&self) -> f64 {
        self.condition1_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_condition2(&self) -> f64 {
        self.condition2_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `dura_value - bound_value`; nonnegative up to rounding.
    pub fn gap(&self) -> f64 {
        self.dura_value - self.bound_value
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "relations {}\ndura_value {:.12e}\nbound_value {:.12e}\ngap {:.6e}\n",
            self.n_relations,
            self.dura_value,
            self.bound_value,
            self.gap()
        );
        s.push_str("d\t|h_d|\t|r_d|\t|t_d|\tcond1\tcond2\n");
        for (d, c) in self.columns.iter().enumerate() {
            s.push_str(&format!(
                "{d}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.3e}\t{:.3e}\n",
                c.head, c.relation, c.tail, self.condition1_residuals[d], self.condition2_residuals[d]
            ));
        }
        s
    }
}

fn column_norms(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.map_axis(Axis(0), |col| col.dot(&col).sqrt())
}

fn check_shapes(h: &Array2<f64>, r: &Array2<f64>, t: &Array2<f64>) -> Result<()> {
    if h.ncols() != r.ncols() || t.ncols() != r.ncols() {
        return Err(KgeError::Contract(format!(
            "column counts differ: H {}, R {}, T {}",
            h.ncols(),
            r.ncols(),
            t.ncols()
        )));
    }
    Ok(())
}

/// Balance report for CP factors `H` (`|E| x D`), `R` (`|R| x D`, row `j`
/// holding the diagonal of `R_j`) and `T` (`|E| x D`).
pub fn balance_report(h: &Array2<f64>, r: &Array2<f64>, t: &Array2<f64>) -> Result<BalanceReport> {
    check_shapes(h, r, t)?;
    let n_rel = r.nrows();
    let sqrt_n = (n_rel as f64).sqrt();
    let (hn, rn, tn) = (column_norms(h.view()), column_norms(r.view()), column_norms(t.view()));

    // Evaluated from the matrices rather than the column-norm identity so the
    // report does not assume what it is checking.
    let fro = |m: &Array2<f64>| m.iter().map(|x| x * x).sum::<f64>();
    let (h_fro, t_fro) = (fro(h), fro(t));
    let mut dura = 0.0;
    for rj in r.rows() {
        let hr = h * &rj;
        let tr = t * &rj;
        dura += fro(&hr) + t_fro + fro(&tr) + h_fro;
    }

    let mut columns = Vec::with_capacity(r.ncols());
    let mut c1 = Vec::with_capacity(r.ncols());
    let mut c2 = Vec::with_capacity(r.ncols());
    let mut product_sum = 0.0;
    for d in 0..r.ncols() {
        let (a, b, c) = (hn[d], rn[d], tn[d]);
        columns.push(ColumnNorms {
            head: a,
            relation: b,
            tail: c,
        });
        c1.push((a * b - sqrt_n * c).abs());
        c2.push((c * b - sqrt_n * a).abs());
        product_sum += a * b * c;
    }
    Ok(BalanceReport {
        n_relations: n_rel,
        columns,
        condition1_residuals: c1,
        condition2_residuals: c2,
        dura_value: dura,
        bound_value: 4.0 * sqrt_n * product_sum,
    })
}

/// Rescales each column to `|r'_:d| = sqrt(|R|)` and `|h'_:d| = |t'_:d|`.
/// Columns where any factor is zero are returned unchanged.
pub fn rebalance(
    h: &Array2<f64>,
    r: &Array2<f64>,
    t: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    check_shapes(h, r, t)?;
    let sqrt_n = (r.nrows() as f64).sqrt();
    let (hn, rn, tn) = (column_norms(h.view()), column_norms(r.view()), column_norms(t.view()));
    let (mut h2, mut r2, mut t2) = (h.clone(), r.clone(), t.clone());
    for d in 0..r.ncols() {
        let (a, b, c) = (hn[d], rn[d], tn[d]);
        if a == 0.0 || b == 0.0 || c == 0.0 {
            continue;
        }
        let beta = sqrt_n / b;
        let alpha = (b * c / (sqrt_n * a)).sqrt();
        let gamma = (a * b / (sqrt_n * c)).sqrt();
        h2.column_mut(d).mapv_inplace(|x| x * alpha);
        r2.column_mut(d).mapv_inplace(|x| x * beta);
        t2.column_mut(d).mapv_inplace(|x| x * gamma);
    }
    Ok((h2, r2, t2))
}

fn cp_factors(params: &ModelParams) -> Result<(&Array2<f64>, &Array2<f64>, &Array2<f64>)> {
    if params.kind != ModelKind::Cp {
        return Err(KgeError::Unsupported(format!(
            "balance checks need a real diagonal-relation (CP) model, got {}",
            params.kind
        )));
    }
    Ok((params.head_table(), &params.tables.relation, params.tail_table()))
}

/// [`balance_report`] on a CP model's tables.
pub fn model_balance_report(params: &ModelParams) -> Result<BalanceReport> {
    let (h, r, t) = cp_factors(params)?;
    balance_report(h, r, t)
}

/// [`rebalance`] applied to a CP model.
pub fn rebalance_model(params: &ModelParams) -> Result<ModelParams> {
    let (h, r, t) = cp_factors(params)?;
    let (h2, r2, t2) = rebalance(h, r, t)?;
    let mut out = params.clone();
    out.tables.entity = h2;
    out.tables.relation = r2;
    out.tables.tail = Some(t2);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn balanced_single_entry() {
        let one = array![[1.0]];
        let rep = balance_report(&one, &one, &one).unwrap();
        assert_eq!(rep.dura_value, 4.0);
        assert_eq!(rep.bound_value, 4.0);
        assert_eq!(rep.condition1_residuals, vec![0.0]);
        assert_eq!(rep.condition2_residuals, vec![0.0]);
    }

    #[test]
    fn unbalanced_single_entry() {
        let (h, r, t) = (array![[2.0]], array![[2.0]], array![[1.0]]);
        let rep = balance_report(&h, &r, &t).unwrap();
        assert_eq!(rep.dura_value, 25.0);
        assert_eq!(rep.bound_value, 16.0);

        let (h2, r2, t2) = rebalance(&h, &r, &t).unwrap();
        assert_eq!((h2[[0, 0]], r2[[0, 0]], t2[[0, 0]]), (2.0, 1.0, 2.0));
        assert_eq!(h2[[0, 0]] * r2[[0, 0]] * t2[[0, 0]], 4.0);
        let after = balance_report(&h2, &r2, &t2).unwrap();
        assert_eq!(after.max_condition1(), 0.0);
        assert_eq!(after.max_condition2(), 0.0);
        assert_eq!(after.dura_value, 16.0);
    }

    #[test]
    fn zeros_everywhere() {
        let z = Array2::<f64>::zeros((3, 2));
        let zr = Array2::<f64>::zeros((2, 2));
        let rep = balance_report(&z, &zr, &z).unwrap();
        assert_eq!(rep.dura_value, 0.0);
        assert_eq!(rep.bound_value, 0.0);
        assert!(rep.condition1_residuals.iter().all(|&x| x == 0.0));
        let (h, r, t) = rebalance(&z, &zr, &z).unwrap();
        assert_eq!((h, r, t), (z.clone(), zr, z));
    }

    #[test]
    fn zero_column_passes_through() {
        let h = array![[1.0, 0.0], [2.0, 0.0]];
        let r = array![[3.0, 1.0]];
        let t = array![[1.0, 5.0], [1.0, 1.0]];
        let (h2, r2, t2) = rebalance(&h, &r, &t).unwrap();
        assert_eq!(h2.column(1), h.column(1));
        assert_eq!(r2.column(1), r.column(1));
        assert_eq!(t2.column(1), t.column(1));
    }

    #[test]
    fn rescal_rejected() {
        let p = ModelParams::zeros(ModelKind::Rescal, 2, 2, 2).unwrap();
        assert!(matches!(model_balance_report(&p), Err(KgeError::Unsupported(_))));
        let p = ModelParams::zeros(ModelKind::ComplEx, 2, 2, 2).unwrap();
        assert!(rebalance_model(&p).is_err());
    }
}
