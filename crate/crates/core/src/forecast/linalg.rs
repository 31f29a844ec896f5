//! Dense symmetric positive-definite helpers (row-major `n x n`).

/// In-place lower Cholesky factorisation. On success the lower triangle of
/// `a` holds `L` with `a = L L^T` and the strict upper triangle is zeroed.
/// Returns the failing pivot index when `a` is not numerically positive
/// definite; a pivot counts as failed when it is not above `rel_tol` times
/// the largest original diagonal entry.
pub fn cholesky_in_place(a: &mut [f64], n: usize, rel_tol: f64) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    let floor = rel_tol * max_diag;
    for j in 0..n {
        let (done, rest) = a.split_at_mut((j + 1) * n);
        let row_j = &mut done[j * n..];
        let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
        if !(d > floor) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        row_j[j] = d;
        row_j[j + 1..].fill(0.0);
        let row_j = &done[j * n..j * n + j];
        for row_i in rest.chunks_mut(n) {
            let s = row_i[j] - row_i[..j].iter().zip(row_j).map(|(x, y)| x * y).sum::<f64>();
            row_i[j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` given the lower factor.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `L z = b` (forward substitution only).
pub fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    y
}
