use ndarray::{Array1, Array2};

use crate::{LinalgError, Result, RngStream};

pub type Matrix = Array2<f64>;
pub type Vector = Array1<f64>;

/// Builds a matrix from row-major entries, rejecting wrong lengths and
/// non-finite values.
pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Matrix> {
    if entries.len() != rows * cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = Array2::from_shape_vec((rows, cols), entries).map_err(|e| LinalgError::DimensionMismatch(e.to_string()))?;
    check_finite(&m)?;
    Ok(m)
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(LinalgError::NonFinite { row, col });
        }
    }
    Ok(())
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest |a_ij - a_ji|. Panics on non-square input.
pub fn symmetry_defect(m: &Matrix) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Symmetric within `rel_tol` relative to the largest entry.
pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    m.is_square() && symmetry_defect(m) <= rel_tol * max_abs(m).max(f64::MIN_POSITIVE)
}

/// Entries drawn i.i.d. from N(0, variance).
pub fn gaussian_matrix(rows: usize, cols: usize, variance: f64, rng: &mut RngStream) -> Matrix {
    let std_dev = variance.sqrt();
    Array2::from_shape_simple_fn((rows, cols), || std_dev * rng.gaussian())
}

/// Entries drawn i.i.d. from U(-bound, bound).
pub fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut RngStream) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform_range(-bound, bound))
}
