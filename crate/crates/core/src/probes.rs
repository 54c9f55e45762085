//! Equilibrated energy of linear networks, the loss/energy ratio and PC vs
//! BP gradient alignment.

use ndarray::Zip;
use pclab_linalg::{cholesky, Matrix};
use serde::Serialize;

use crate::inference::infer_analytic;
use crate::learning::{backprop_gradient, weight_gradient};
use crate::{Network, PcError, Result};

fn require_linear(net: &Network) -> Result<()> {
    if !net.is_linear() {
        return Err(PcError::Unsupported(
            "equilibrated energy needs a linear network".into(),
        ));
    }
    Ok(())
}

/// `S = I + sum_{l=1}^{H} M_l M_l^T` where `M_l = B_L B_{L-1} ... B_{l+1}`
/// maps `z_l` to the output.
pub fn rescaling_matrix(net: &Network) -> Result<Matrix> {
    require_linear(net)?;
    let depth = net.depth();
    let mut s = Matrix::eye(net.spec.d_out);
    if depth == 1 {
        return Ok(s);
    }
    let mut m = net.layer_map(depth);
    s += &m.dot(&m.t());
    for l in (2..depth).rev() {
        m = m.dot(&net.layer_map(l));
        s += &m.dot(&m.t());
    }
    Ok(s)
}

/// Energy at the inference equilibrium, `(1/2B) sum_i r_i^T S^{-1} r_i` with
/// `r_i = y_i - f(x_i)`.
pub fn equilibrated_energy(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64> {
    let s = rescaling_matrix(net)?;
    let f = net.output(x)?;
    if f.dim() != y.dim() {
        return Err(PcError::Dimension(format!(
            "target is {:?}, output is {:?}",
            y.dim(),
            f.dim()
        )));
    }
    let r = y - &f;
    let solved = cholesky(&s)?.solve_many(r.view())?;
    let quad = Zip::from(&r).and(&solved).fold(0.0, |acc, &a, &b| acc + a * b);
    Ok(0.5 * quad / x.ncols() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRecord {
    pub width: usize,
    pub hidden: usize,
    pub step: usize,
    pub loss: f64,
    pub energy: f64,
    /// MSE loss over equilibrated energy.
    pub ratio: f64,
}

pub fn loss_energy_ratio(net: &Network, x: &Matrix, y: &Matrix, step: usize) -> Result<RatioRecord> {
    let energy = equilibrated_energy(net, x, y)?;
    let loss = crate::learning::mse_loss(net, x, y)?;
    if energy == 0.0 {
        return Err(PcError::Degenerate("equilibrated energy is zero".into()));
    }
    Ok(RatioRecord {
        width: net.spec.width,
        hidden: net.hidden(),
        step,
        loss,
        energy,
        ratio: loss / energy,
    })
}

fn cosine(a: &Matrix, b: &Matrix) -> Option<f64> {
    let dot = Zip::from(a).and(b).fold(0.0, |acc, &p, &q| acc + p * q);
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| dot / (na * nb))
}

/// Per-layer cosine between the PC weight gradient at the equilibrium and the
/// BP gradient of the MSE.
pub fn gradient_alignment(net: &Network, x: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
    require_linear(net)?;
    let z = infer_analytic(net, x, y)?;
    let pc = weight_gradient(net, &z)?;
    let (bp, _) = backprop_gradient(net, x, y)?;
    pc.iter()
        .zip(&bp)
        .enumerate()
        .map(|(k, (p, b))| cosine(p, b).ok_or_else(|| PcError::Degenerate(format!("zero gradient at layer {}", k + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::teacher_regression;
    use crate::energy::pc_energy;
    use crate::{NetworkSpec, Parameterisation};
    use pclab_linalg::{gaussian_matrix, sym_eigvals, RngStream};

    fn resnet(n: usize, h: usize, seed: u64) -> Network {
        let spec = NetworkSpec::new(6, n, h, 3, Parameterisation::MuPc)
            .with_residual(true)
            .with_seed(seed);
        Network::init(spec).unwrap()
    }

    #[test]
    fn zero_weights() {
        let net = resnet(4, 3, 1).zeroed();
        assert_eq!(rescaling_matrix(&net).unwrap(), Matrix::eye(3));
        let mut rng = RngStream::new(2);
        let x = gaussian_matrix(6, 5, 1.0, &mut rng);
        let y = gaussian_matrix(3, 5, 1.0, &mut rng);
        let e = equilibrated_energy(&net, &x, &y).unwrap();
        assert!((e - 0.5 * y.mapv(|v| v * v).sum() / 5.0).abs() < 1e-14);
        assert_eq!(loss_energy_ratio(&net, &x, &y, 0).unwrap().ratio, 1.0);
    }

    #[test]
    fn matches_energy_at_analytic_equilibrium() {
        for seed in 0..5 {
            let net = resnet(16, 4, seed);
            let d = teacher_regression(6, 3, 7, 0.1, seed);
            let z = infer_analytic(&net, &d.inputs, &d.targets).unwrap();
            let direct = pc_energy(&net, &z).unwrap().total;
            let eq = equilibrated_energy(&net, &d.inputs, &d.targets).unwrap();
            assert!((direct - eq).abs() <= 1e-6 * direct.abs(), "{direct} vs {eq}");
        }
    }

    #[test]
    fn scalar_single_hidden_layer_by_hand() {
        let net = Network::scalar(Parameterisation::MuPc, &[0.7, 1.3], true).unwrap();
        let (x, y) = (Matrix::from_elem((1, 2), 1.5), Matrix::from_elem((1, 2), -0.5));
        let a = net.params.a.clone();
        let f = a[1] * 1.3 * a[0] * 0.7 * 1.5;
        let r = -0.5 - f;
        let expect = 0.5 * r * r / (1.0 + (a[1] * 1.3).powi(2)) * 2.0 / 2.0;
        assert!((equilibrated_energy(&net, &x, &y).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn rescaling_is_positive_definite() {
        for seed in 0..100 {
            let net = resnet(2 + (seed as usize % 7), 1 + (seed as usize % 5), seed);
            let s = rescaling_matrix(&net).unwrap();
            assert!(sym_eigvals(&s).unwrap().min() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn ratio_moves_away_from_one_with_depth() {
        // S >= I, so the ratio is at least 1, and every extra hidden layer adds
        // a PSD term to S.
        let d = teacher_regression(32, 10, 256, 0.0, 7);
        let mean_ratio = |h: usize| -> f64 {
            (0..3)
                .map(|s| {
                    loss_energy_ratio(&resnet_io(128, h, s), &d.inputs, &d.targets, 0)
                        .unwrap()
                        .ratio
                })
                .sum::<f64>()
                / 3.0
        };
        let r: Vec<f64> = [2, 4, 8].iter().map(|&h| mean_ratio(h)).collect();
        assert!(r[0] >= 1.0 && r[0] < r[1] && r[1] < r[2], "{r:?}");
    }

    fn resnet_io(n: usize, h: usize, seed: u64) -> Network {
        let spec = NetworkSpec::new(32, n, h, 10, Parameterisation::MuPc)
            .with_residual(true)
            .with_seed(seed);
        Network::init(spec).unwrap()
    }

    #[test]
    fn alignment_single_layer_and_wide_limit() {
        let spec = NetworkSpec::new(4, 1, 0, 2, Parameterisation::MuPc).with_seed(2);
        let net = Network::init(spec).unwrap();
        let d = teacher_regression(4, 2, 8, 0.1, 1);
        let c = gradient_alignment(&net, &d.inputs, &d.targets).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - 1.0).abs() < 1e-14);
        let d = teacher_regression(6, 3, 16, 0.1, 3);
        let wide = resnet(256, 2, 4);
        let c = gradient_alignment(&wide, &d.inputs, &d.targets).unwrap();
        assert!(c.iter().all(|&v| v >= 0.99), "{c:?}");
    }

    #[test]
    fn zero_gradient_is_flagged() {
        let net = resnet(4, 2, 1).zeroed();
        let d = teacher_regression(6, 3, 4, 0.0, 1);
        assert!(matches!(
            gradient_alignment(&net, &d.inputs, &d.targets),
            Err(PcError::Degenerate(_))
        ));
    }
}
