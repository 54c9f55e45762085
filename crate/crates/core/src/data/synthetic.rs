use pclab_linalg::{gaussian_matrix, Matrix, RngStream};

use super::Dataset;

/// Scalar regression `y = -x + eps` with `x ~ N(1, 1)` and `eps ~ N(0, 0.5)`
/// (variance 0.5).
pub fn toy_regression(n: usize, seed: u64) -> Dataset {
    assert!(n >= 1, "need at least one sample");
    let mut rng = RngStream::new(seed);
    let mut x = Matrix::zeros((1, n));
    let mut y = Matrix::zeros((1, n));
    let sd = 0.5f64.sqrt();
    for j in 0..n {
        let xv = rng.normal(1.0, 1.0);
        x[[0, j]] = xv;
        y[[0, j]] = -xv + rng.normal(0.0, sd);
    }
    Dataset::new(x, y, "toy_regression", "train").expect("matching columns")
}

/// Two Gaussian classes separated by a margin along a random direction;
/// linearly separable by construction.
pub fn separable_two_class(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed);
    let dir = gaussian_matrix(d, 1, 1.0, &mut rng);
    let dir = &dir / dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = gaussian_matrix(d, n, 1.0, &mut rng);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let mut col = x.column_mut(j);
        let proj: f64 = col.iter().zip(dir.iter()).map(|(a, b)| a * b).sum();
        let class = usize::from(proj > 0.0);
        let shift = if class == 1 { 2.0 } else { -2.0 };
        for (v, u) in col.iter_mut().zip(dir.iter()) {
            *v += shift * u;
        }
        labels.push(class);
    }
    Dataset::classification(x, labels, 2, "separable", "train").expect("matching columns")
}

/// Gaussian inputs mapped through a random linear teacher,
/// `y = T x / sqrt(d_in)` with standard Gaussian `T`, plus noise of
/// standard deviation `noise`.
pub fn teacher_regression(d_in: usize, d_out: usize, n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed);
    let t = gaussian_matrix(d_out, d_in, 1.0 / d_in as f64, &mut rng);
    let x = gaussian_matrix(d_in, n, 1.0, &mut rng);
    let mut y = t.dot(&x);
    if noise > 0.0 {
        y += &gaussian_matrix(d_out, n, noise * noise, &mut rng);
    }
    Dataset::new(x, y, "teacher", "train").expect("matching columns")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_regression_moments() {
        let d = toy_regression(10_000, 5);
        let n = 10_000.0;
        let mean_y = d.targets.sum() / n;
        // y has variance 1.5; three standard errors.
        assert!((mean_y + 1.0).abs() < 3.0 * (1.5f64 / n).sqrt());
        let eps: Vec<f64> = (0..10_000).map(|j| d.targets[[0, j]] + d.inputs[[0, j]]).collect();
        let m = eps.iter().sum::<f64>() / n;
        let var = eps.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.4..=0.6).contains(&var), "variance {var}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(toy_regression(50, 1), toy_regression(50, 1));
        assert_eq!(separable_two_class(20, 3, 2), separable_two_class(20, 3, 2));
    }

    #[test]
    fn separable_has_one_hot_targets() {
        let d = separable_two_class(100, 4, 3);
        assert!(d.targets.columns().into_iter().all(|c| c.sum() == 1.0));
        let l = d.labels.unwrap();
        assert!(l.contains(&0) && l.contains(&1));
    }
}
