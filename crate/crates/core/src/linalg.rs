//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Solves `h x = g` for a symmetric positive semi-definite `h`.
///
/// Falls back to a growing diagonal ridge when the Cholesky factorization fails,
/// which keeps Newton steps defined as fitted weights concentrate.
pub fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(g));
    }
    let scale = (h.trace() / h.nrows().max(1) as f64).abs().max(1e-300);
    let mut ridge = 1e-12 * scale;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(ch.solve(g));
        }
        ridge *= 10.0;
    }
    None
}

/// Indices of columns that are linear combinations of earlier columns.
///
/// Columns are centered and scaled first, so an intercept is implicit.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let n = x.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let mut v: DVector<f64> = col.map(|c| c - mean);
        let norm = v.norm();
        if norm == 0.0 {
            dependent.push(j);
            continue;
        }
        v /= norm;
        // Modified Gram-Schmidt against the accepted columns, applied twice.
        for _ in 0..2 {
            for q in &kept {
                let r = q.dot(&v);
                v.axpy(-r, q, 1.0);
            }
        }
        let resid = v.norm();
        if resid < 1e-9 {
            dependent.push(j);
        } else {
            kept.push(v / resid);
        }
    }
    dependent
}
