//! Dense matrix aliases and small helpers shared by the numeric modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;

/// Builds a matrix from row slices. All rows must have length `cols`.
pub fn mat_from_rows(rows: &[Vec<f64>], cols: usize) -> Mat {
    Mat::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Stacks matrices vertically. All parts must share `cols` columns.
pub fn vstack(parts: &[&Mat], cols: usize) -> Mat {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), (p.nrows(), cols)).copy_from(*p);
        r += p.nrows();
    }
    out
}

/// Stacks matrices horizontally. All parts must share `rows` rows.
pub fn hstack(parts: &[&Mat], rows: usize) -> Mat {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(*p);
        c += p.ncols();
    }
    out
}

pub fn complexify(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Largest singular value, with 0 for empty matrices.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Number of singular values above `tol * max(scale, 1)` for a complex matrix.
pub fn complex_rank(m: &CMat, tol: f64, scale: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let threshold = tol * scale.max(1.0);
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > threshold)
        .count()
}

/// Integer power of a square matrix.
pub fn mat_pow(a: &Mat, k: usize) -> Mat {
    let mut out = Mat::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}
