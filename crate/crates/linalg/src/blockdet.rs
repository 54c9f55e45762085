//! Leading block principal minors of a symmetric block-tridiagonal matrix
//! with diagonal blocks `diag[k]` and sub-diagonal blocks `off[k]` at block
//! position `(k + 1, k)`.

use crate::lu::{log_determinant, lu_solve, SignedLog};
use crate::{LinalgError, Matrix, Result};

fn check_shapes(diag: &[Matrix], off: &[Matrix]) -> Result<()> {
    if diag.is_empty() {
        return Err(LinalgError::DimensionMismatch("no diagonal blocks".into()));
    }
    if off.len() + 1 != diag.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{} diagonal blocks need {} off-diagonal blocks, got {}",
            diag.len(),
            diag.len() - 1,
            off.len()
        )));
    }
    for (k, d) in diag.iter().enumerate() {
        if d.nrows() != d.ncols() {
            return Err(LinalgError::NotSquare {
                rows: d.nrows(),
                cols: d.ncols(),
            });
        }
        if k > 0 {
            let o = &off[k - 1];
            if o.nrows() != d.nrows() || o.ncols() != diag[k - 1].nrows() {
                return Err(LinalgError::DimensionMismatch(format!(
                    "off-diagonal block {} is {}x{}, expected {}x{}",
                    k - 1,
                    o.nrows(),
                    o.ncols(),
                    d.nrows(),
                    diag[k - 1].nrows()
                )));
            }
        }
    }
    Ok(())
}

/// Scalar determinant recurrence
/// `D_k = |diag_k| D_{k-1} - |off_{k-1}|^2 D_{k-2}` with `D_0 = 1`,
/// returned as `[D_0, D_1, ..., D_H]`. It is exact for 1x1 blocks and for
/// commuting blocks; in general it is a heuristic. Requires square
/// off-diagonal blocks.
pub fn block_det_recurrence(diag: &[Matrix], off: &[Matrix]) -> Result<Vec<SignedLog>> {
    check_shapes(diag, off)?;
    for o in off {
        if o.nrows() != o.ncols() {
            return Err(LinalgError::NotSquare {
                rows: o.nrows(),
                cols: o.ncols(),
            });
        }
    }
    let mut out = Vec::with_capacity(diag.len() + 1);
    out.push(SignedLog::ONE);
    out.push(log_determinant(&diag[0])?);
    for k in 1..diag.len() {
        let dk = log_determinant(&diag[k])?;
        let ok = log_determinant(&off[k - 1])?;
        let ok2 = ok * ok;
        let next = dk * out[k] - ok2 * out[k - 1];
        out.push(next);
    }
    Ok(out)
}

/// Block LDL^T pivots: `S_0 = diag_0`,
/// `S_k = diag_k - off_{k-1} S_{k-1}^{-1} off_{k-1}^T`. The matrix is
/// positive definite iff every `S_k` is.
pub fn block_schur_complements(diag: &[Matrix], off: &[Matrix]) -> Result<Vec<Matrix>> {
    check_shapes(diag, off)?;
    let mut out: Vec<Matrix> = Vec::with_capacity(diag.len());
    out.push(diag[0].clone());
    for k in 1..diag.len() {
        let o = &off[k - 1];
        let solved = lu_solve(&out[k - 1], &o.t().to_owned())?;
        out.push(&diag[k] - &o.dot(&solved));
    }
    Ok(out)
}

/// Exact leading block minors, `[1, M_1, ..., M_H]` with
/// `M_k = prod_{j<k} det S_j`.
pub fn block_schur_minors(diag: &[Matrix], off: &[Matrix]) -> Result<Vec<SignedLog>> {
    let schur = block_schur_complements(diag, off)?;
    let mut out = Vec::with_capacity(diag.len() + 1);
    out.push(SignedLog::ONE);
    for (k, s) in schur.iter().enumerate() {
        let d = log_determinant(s)?;
        out.push(out[k] * d);
    }
    Ok(out)
}
