//! Dense solvers for the small systems that appear in local regression and
//! least-squares final stages.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for a square row-major `a`. Returns `None` when the
/// smallest singular value falls below `tol` times the largest.
pub fn solve(a: &[f64], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix/vector size mismatch");
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= tol * smax {
        return None;
    }
    let x = svd.solve(&DVector::from_column_slice(b), 0.0).ok()?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Weighted least squares: minimizes `Σ w_i (y_i - x_i·β)^2` through the
/// normal equations. `rows` holds the design rows.
pub fn weighted_least_squares(rows: &[Vec<f64>], ys: &[f64], weights: &[f64]) -> Option<Vec<f64>> {
    let p = rows.first()?.len();
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for ((x, &y), &w) in rows.iter().zip(ys).zip(weights) {
        if w == 0.0 {
            continue;
        }
        for i in 0..p {
            xty[i] += w * x[i] * y;
            for j in 0..p {
                xtx[i * p + j] += w * x[i] * x[j];
            }
        }
    }
    solve(&xtx, &xty, 1e-12)
}
