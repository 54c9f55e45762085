//! Dense real linear algebra for the pclab workspace.
//!
//! Storage and matrix products come from `ndarray` (row-major `Array2<f64>`);
//! the factorisations used by the inference-landscape analysis are written
//! here: symmetric eigendecomposition (Householder tridiagonalisation plus
//! implicit QL), Cholesky solves, LU determinants, Householder QR and the
//! block-tridiagonal determinant recurrence.

pub mod blockdet;
pub mod cholesky;
pub mod eigen;
pub mod lu;
pub mod matrix;
pub mod qr;
pub mod rng;

pub use blockdet::{block_det_recurrence, block_schur_complements, block_schur_minors};
pub use cholesky::{cholesky, solve_spd, solve_spd_many, Cholesky};
pub use eigen::{sym_eig, sym_eigvals, Spectrum};
pub use lu::{determinant, log_determinant, lu_solve, SignedLog};
pub use matrix::{
    check_finite, frobenius_norm, from_row_major, gaussian_matrix, is_symmetric, max_abs, symmetry_defect,
    uniform_matrix, Matrix, Vector,
};
pub use qr::{householder_qr, orthogonal_init};
pub use rng::RngStream;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {defect:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { defect: f64, tolerance: f64 },
    #[error("matrix is not positive definite: pivot {index} = {pivot:.6e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is singular at column {0}")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("eigensolver failed to converge at index {0}")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, LinalgError>;
