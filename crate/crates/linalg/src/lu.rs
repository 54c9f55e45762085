use crate::{LinalgError, Matrix, Result};

/// Sign and log-magnitude of a determinant. Products of many block
/// determinants overflow `f64` long before they lose meaning, so callers that
/// chain them work in this form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog { sign: 1.0, ln_abs: 0.0 };
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: x.signum(),
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// Plain value; overflows to +-inf for large magnitudes.
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }
    pub fn is_positive(&self) -> bool {
        self.sign > 0.0
    }
}

impl std::ops::Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0.0 || other.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }
}

impl std::ops::Sub for SignedLog {
    type Output = SignedLog;

    fn sub(self, other: SignedLog) -> SignedLog {
        if other.sign == 0.0 {
            return self;
        }
        if self.sign == 0.0 {
            return SignedLog {
                sign: -other.sign,
                ln_abs: other.ln_abs,
            };
        }
        let m = self.ln_abs.max(other.ln_abs);
        let v = self.sign * (self.ln_abs - m).exp() - other.sign * (other.ln_abs - m).exp();
        if v == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: v.signum(),
                ln_abs: m + v.abs().ln(),
            }
        }
    }
}

/// LU with partial pivoting; returns (sign, ln|det|). A singular matrix gives
/// sign 0 and ln_abs = -inf.
pub fn log_determinant(a: &Matrix) -> Result<SignedLog> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    let n = rows;
    let mut lu = a.clone();
    let mut sign = 1.0;
    let mut ln_abs = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| lu[[x, col]].abs().total_cmp(&lu[[y, col]].abs()))
            .unwrap();
        let p = lu[[piv, col]];
        if p == 0.0 {
            return Ok(SignedLog {
                sign: 0.0,
                ln_abs: f64::NEG_INFINITY,
            });
        }
        if piv != col {
            for j in 0..n {
                lu.swap([col, j], [piv, j]);
            }
            sign = -sign;
        }
        if p < 0.0 {
            sign = -sign;
        }
        ln_abs += p.abs().ln();
        for r in col + 1..n {
            let f = lu[[r, col]] / p;
            if f != 0.0 {
                for j in col + 1..n {
                    lu[[r, j]] -= f * lu[[col, j]];
                }
            }
        }
    }
    Ok(SignedLog { sign, ln_abs })
}

/// Solves `a X = b` by LU with partial pivoting. Singular systems fail with
/// the offending column.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if b.nrows() != rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} rows for a {rows}x{rows} system",
            b.nrows()
        )));
    }
    let n = rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| lu[[p, col]].abs().total_cmp(&lu[[q, col]].abs()))
            .unwrap();
        let p = lu[[piv, col]];
        if p == 0.0 {
            return Err(LinalgError::Singular(col));
        }
        if piv != col {
            for j in 0..n {
                lu.swap([col, j], [piv, j]);
            }
            for j in 0..x.ncols() {
                x.swap([col, j], [piv, j]);
            }
        }
        for r in col + 1..n {
            let f = lu[[r, col]] / p;
            if f != 0.0 {
                for j in col + 1..n {
                    lu[[r, j]] -= f * lu[[col, j]];
                }
                for j in 0..x.ncols() {
                    x[[r, j]] -= f * x[[col, j]];
                }
            }
        }
    }
    for r in (0..n).rev() {
        for j in 0..x.ncols() {
            let mut s = x[[r, j]];
            for k in r + 1..n {
                s -= lu[[r, k]] * x[[k, j]];
            }
            x[[r, j]] = s / lu[[r, r]];
        }
    }
    Ok(x)
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    let d = log_determinant(a)?;
    Ok(d.sign * d.ln_abs.exp())
}
