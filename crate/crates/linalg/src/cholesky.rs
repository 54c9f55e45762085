use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{LinalgError, Matrix, Result};

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

/// Factorises `a = L L^T`. Fails with the index of the first non-positive
/// pivot. Only the lower triangle of `a` is read.
pub fn cholesky(a: &Matrix) -> Result<Cholesky> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    let n = rows;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        {
            let row_j = l.row(j);
            for k in 0..j {
                pivot -= row_j[k] * row_j[k];
            }
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[[j, j]] = diag;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                s -= ri[k] * rj[k];
            }
            l[[i, j]] = s / diag;
        }
    }
    Ok(Cholesky { lower: l })
}

impl Cholesky {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs of length {} for a {n}x{n} system",
                b.len()
            )));
        }
        let l = &self.lower;
        let mut y = b.to_owned();
        for i in 0..n {
            let row = l.row(i);
            let mut s = y[i];
            for k in 0..i {
                s -= row[k] * y[k];
            }
            y[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        Ok(y)
    }

    /// Solves for every column of `b`.
    pub fn solve_many(&self, b: ArrayView2<f64>) -> Result<Matrix> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(col)?);
        }
        Ok(out)
    }

    /// ln det(a) = 2 sum ln L_ii.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diag().iter().map(|v| v.ln()).sum::<f64>()
    }
}

pub fn solve_spd(a: &Matrix, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    cholesky(a)?.solve(b)
}

pub fn solve_spd_many(a: &Matrix, b: ArrayView2<f64>) -> Result<Matrix> {
    cholesky(a)?.solve_many(b)
}
