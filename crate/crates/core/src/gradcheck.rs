//! Central finite differences over every model parameter.
//!
//! Used to check analytic gradients: the numeric side only ever evaluates
//! the objective value.

use crate::model::{Gradients, ModelParams, Tables};

/// `(f(x + step e_i) - f(x - step e_i)) / (2 step)` for every coordinate.
pub fn central_differences<F>(params: &ModelParams, step: f64, mut objective: F) -> Gradients
where
    F: FnMut(&ModelParams) -> f64,
{
    let mut probe = params.clone();
    let mut out = Tables::zeros_like(&params.tables);
    let n_tables = params.tables.arrays().count();
    for table_idx in 0..n_tables {
        let len = params.tables.arrays().nth(table_idx).unwrap().len();
        for i in 0..len {
            let original = nth_value(&probe, table_idx, i);
            set_value(&mut probe, table_idx, i, original + step);
            let plus = objective(&probe);
            set_value(&mut probe, table_idx, i, original - step);
            let minus = objective(&probe);
            set_value(&mut probe, table_idx, i, original);
            let slot = out.arrays_mut().nth(table_idx).unwrap();
            slot.as_slice_mut().expect("standard layout")[i] = (plus - minus) / (2.0 * step);
        }
    }
    out
}

fn nth_value(p: &ModelParams, table: usize, i: usize) -> f64 {
    p.tables.arrays().nth(table).unwrap().as_slice().expect("standard layout")[i]
}

fn set_value(p: &mut ModelParams, table: usize, i: usize, v: f64) {
    p.tables.arrays_mut().nth(table).unwrap().as_slice_mut().expect("standard layout")[i] = v;
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps coordinates whose true
/// derivative is ~0 from dividing rounding noise by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest [`relative_error`] over all coordinates.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients, floor: f64) -> f64 {
    analytic
        .arrays()
        .zip(numeric.arrays())
        .flat_map(|(a, n)| a.iter().zip(n.iter()).map(|(&x, &y)| relative_error(x, y, floor)).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}
