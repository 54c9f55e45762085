//! Symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts. Both extremes of the spectrum are
//! needed for condition numbers, so the full spectrum is always computed.
//!
//! The reduction works on the lower triangle of a row-major copy; every inner
//! loop walks a contiguous row slice, which keeps the O(n^3) phase memory
//! friendly for the 4096-row Hessians used in the conditioning sweeps.

use ndarray::Array2;

use crate::{LinalgError, Matrix, Result};

/// Symmetric-input eigenvalues, sorted ascending, with optional eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_QL_SWEEPS: usize = 60;

fn validate(a: &Matrix) -> Result<()> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    crate::check_finite(a)?;
    let scale = crate::max_abs(a).max(f64::MIN_POSITIVE);
    let defect = crate::symmetry_defect(a);
    if defect > SYMMETRY_TOL * scale {
        return Err(LinalgError::NotSymmetric {
            defect,
            tolerance: SYMMETRY_TOL * scale,
        });
    }
    Ok(())
}

/// Full eigendecomposition (values and vectors).
pub fn sym_eig(a: &Matrix) -> Result<Spectrum> {
    decompose(a, true)
}

/// Eigenvalues only; skips the O(n^3) vector accumulation.
pub fn sym_eigvals(a: &Matrix) -> Result<Spectrum> {
    decompose(a, false)
}

fn decompose(a: &Matrix, want_vectors: bool) -> Result<Spectrum> {
    validate(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Spectrum {
            values: Vec::new(),
            vectors: want_vectors.then(|| Array2::zeros((0, 0))),
        });
    }
    let mut work: Vec<f64> = a.iter().copied().collect();
    let tri = tridiagonalize(&mut work, n, want_vectors);
    let mut diag = tri.diag;
    let mut off = tri.off;
    let mut zt = tri.q_transpose;
    ql_implicit(&mut diag, &mut off, zt.as_deref_mut(), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = zt.map(|zt| {
        let mut v = Array2::zeros((n, n));
        for (col, &src) in order.iter().enumerate() {
            let row = &zt[src * n..(src + 1) * n];
            for (k, &x) in row.iter().enumerate() {
                v[[k, col]] = x;
            }
        }
        v
    });
    Ok(Spectrum { values, vectors })
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// off[i] = T[i + 1][i]; off[n - 1] = 0.
    off: Vec<f64>,
    /// Row-major Q^T with A = Q T Q^T, when requested.
    q_transpose: Option<Vec<f64>>,
}

fn tridiagonalize(a: &mut [f64], n: usize, want_q: bool) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let m = n - start;
        let v = &mut v[..m];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = a[(start + i) * n + k];
        }
        let tail: f64 = v[1..].iter().map(|x| x * x).sum();
        diag[k] = a[k * n + k];
        if tail == 0.0 {
            off[k] = v[0];
            continue;
        }
        let sigma = (v[0] * v[0] + tail).sqrt();
        let alpha = if v[0] >= 0.0 { -sigma } else { sigma };
        v[0] -= alpha;
        let vnorm2 = v[0] * v[0] + tail;
        let tau = 2.0 / vnorm2;
        off[k] = alpha;

        // p = tau * A22 v, reading only the lower triangle.
        let p = &mut p[..m];
        p.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let row = &a[(start + i) * n + start..(start + i) * n + start + i + 1];
            let vi = v[i];
            let mut acc = row[i] * vi;
            for j in 0..i {
                acc += row[j] * v[j];
                p[j] += row[j] * vi;
            }
            p[i] += acc;
        }
        let mut pv = 0.0;
        for i in 0..m {
            p[i] *= tau;
            pv += p[i] * v[i];
        }
        let half_k = 0.5 * tau * pv;
        // w = p - K v, stored back into p.
        for i in 0..m {
            p[i] -= half_k * v[i];
        }
        // A22 -= v w^T + w v^T on the lower triangle.
        for i in 0..m {
            let row = &mut a[(start + i) * n + start..(start + i) * n + start + i + 1];
            let vi = v[i];
            let wi = p[i];
            for j in 0..=i {
                row[j] -= vi * p[j] + wi * v[j];
            }
        }
        if want_q {
            reflectors.push((start, v.to_vec(), tau));
        }
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + (n - 2)];
        off[n - 2] = a[(n - 1) * n + (n - 2)];
    }
    diag[n - 1] = a[(n - 1) * n + (n - 1)];
    off[n - 1] = 0.0;

    let q_transpose = want_q.then(|| {
        // Q^T = H_last ... H_1 H_0; apply each reflector on the left.
        let mut qt = vec![0.0; n * n];
        for i in 0..n {
            qt[i * n + i] = 1.0;
        }
        let mut u = vec![0.0; n];
        for (start, v, tau) in &reflectors {
            u.iter_mut().for_each(|x| *x = 0.0);
            for (i, &vi) in v.iter().enumerate() {
                let row = &qt[(start + i) * n..(start + i + 1) * n];
                for (uk, &r) in u.iter_mut().zip(row) {
                    *uk += vi * r;
                }
            }
            for (i, &vi) in v.iter().enumerate() {
                let scale = tau * vi;
                let row = &mut qt[(start + i) * n..(start + i + 1) * n];
                for (r, &uk) in row.iter_mut().zip(&u) {
                    *r -= scale * uk;
                }
            }
        }
        qt
    });

    Tridiagonal { diag, off, q_transpose }
}

/// Implicit QL on a symmetric tridiagonal matrix. `zt`, when present, holds
/// the transposed eigenvector accumulator; rotations touch two of its rows.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>, n: usize) -> Result<()> {
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(LinalgError::NoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zt) = zt.as_deref_mut() {
                    let (head, tail) = zt.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..];
                    let row_next = &mut tail[..n];
                    for (zi, zn) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let f = *zn;
                        *zn = s * *zi + c * f;
                        *zi = c * *zi - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
