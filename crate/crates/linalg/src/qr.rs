use ndarray::Array2;

use crate::{gaussian_matrix, LinalgError, Matrix, Result, RngStream};

/// Thin Householder QR of a tall matrix (`rows >= cols`): returns `(Q, R)`
/// with `Q` of shape rows x cols and upper-triangular `R` of shape cols x cols.
pub fn householder_qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, n) = a.dim();
    if m < n {
        return Err(LinalgError::DimensionMismatch(format!(
            "thin QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r[[i, k]]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push((v, 0.0));
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let tau = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        for j in k..n {
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * r[[k + i, j]]).sum();
            let s = tau * dot;
            for (i, vi) in v.iter().enumerate() {
                r[[k + i, j]] -= s * vi;
            }
        }
        reflectors.push((v, tau));
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = Array2::<f64>::zeros((m, n));
    for i in 0..n {
        q[[i, i]] = 1.0;
    }
    for (k, (v, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == 0.0 {
            continue;
        }
        for j in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * q[[k + i, j]]).sum();
            let s = tau * dot;
            for (i, vi) in v.iter().enumerate() {
                q[[k + i, j]] -= s * vi;
            }
        }
    }
    let mut upper = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            upper[[i, j]] = r[[i, j]];
        }
    }
    Ok((q, upper))
}

/// Haar-distributed (semi-)orthogonal matrix: `W^T W = I` when
/// `rows >= cols`, otherwise `W W^T = I`.
pub fn orthogonal_init(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    assert!(rows >= 1 && cols >= 1, "orthogonal_init needs positive dims");
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let g = gaussian_matrix(tall, short, 1.0, rng);
    let (mut q, r) = householder_qr(&g).expect("tall Gaussian matrix");
    // Fix column signs by sign(diag R) so the distribution is Haar.
    for j in 0..short {
        if r[[j, j]] < 0.0 {
            q.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    if rows >= cols {
        q
    } else {
        q.reversed_axes().as_standard_layout().to_owned()
    }
}
