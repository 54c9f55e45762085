use ndarray::Zip;
use pclab_linalg::Matrix;

use crate::{Network, PcError, Result};

/// `1/2 |y - f(x)|^2` averaged over the batch.
pub fn mse_loss(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64> {
    let f = net.output(x)?;
    check_target(&f, y)?;
    Ok(0.5 * Zip::from(&f).and(y).fold(0.0, |acc, &a, &b| acc + (a - b).powi(2)) / x.ncols() as f64)
}

fn check_target(f: &Matrix, y: &Matrix) -> Result<()> {
    if f.dim() != y.dim() {
        return Err(PcError::Dimension(format!(
            "target is {:?}, output is {:?}",
            y.dim(),
            f.dim()
        )));
    }
    Ok(())
}

/// Reverse-mode gradient of the batch-mean MSE through the scaled residual
/// forward pass. Returns the gradients and the loss.
pub fn backprop_gradient(net: &Network, x: &Matrix, y: &Matrix) -> Result<(Vec<Matrix>, f64)> {
    let trace = net.forward(x)?.z;
    let depth = net.depth();
    check_target(&trace[depth - 1], y)?;
    let bsz = x.ncols() as f64;
    let inv_b = 1.0 / bsz;
    // Unscaled output error; the 1/B factor is folded into the scalar so the
    // output gradient is computed exactly as PC computes it.
    let mut delta = &trace[depth - 1] - y;
    let loss = 0.5 * delta.iter().map(|v| v * v).sum::<f64>() / bsz;
    let mut scale = inv_b;
    let act = net.activation();
    let mut grads = vec![Matrix::zeros((0, 0)); depth];
    for l in (1..=depth).rev() {
        let input = if l == 1 { x.clone() } else { act.apply(&trace[l - 2]) };
        let mut g = delta.dot(&input.t());
        g *= net.a(l) * scale;
        if l == depth {
            delta *= inv_b;
            scale = 1.0;
        }
        if l > 1 {
            let mut back = net.weight(l).t().dot(&delta);
            let d = act.derivative(&trace[l - 2]);
            let a = net.a(l);
            Zip::from(&mut back).and(&d).for_each(|b, &dv| *b *= a * dv);
            let tau = net.tau(l);
            if tau != 0.0 {
                back.scaled_add(tau, &delta);
            }
            delta = back;
        }
        grads[l - 1] = g;
    }
    Ok((grads, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Activation, NetworkSpec, Parameterisation};
    use pclab_linalg::{gaussian_matrix, max_abs, RngStream};

    #[test]
    fn single_layer_delta_rule() {
        let spec = NetworkSpec::new(3, 1, 0, 2, Parameterisation::MuPc).with_seed(1);
        let net = Network::init(spec).unwrap();
        let mut rng = RngStream::new(2);
        let x = gaussian_matrix(3, 4, 1.0, &mut rng);
        let y = gaussian_matrix(2, 4, 1.0, &mut rng);
        let (g, _) = backprop_gradient(&net, &x, &y).unwrap();
        let a = net.a(1);
        let r = &y - &(net.weight(1).dot(&x) * a);
        let expect = r.dot(&x.t()) * (-a / 4.0);
        assert!(max_abs(&(&g[0] - &expect)) < 1e-14);
    }

    #[test]
    fn matches_finite_differences_on_tanh_resnet() {
        let spec = NetworkSpec::new(3, 5, 3, 2, Parameterisation::MuPc)
            .with_activation(Activation::Tanh)
            .with_residual(true)
            .with_seed(5);
        let net = Network::init(spec).unwrap();
        let mut rng = RngStream::new(6);
        let x = gaussian_matrix(3, 4, 1.0, &mut rng);
        let y = gaussian_matrix(2, 4, 1.0, &mut rng);
        let (g, loss) = backprop_gradient(&net, &x, &y).unwrap();
        assert!((loss - mse_loss(&net, &x, &y).unwrap()).abs() < 1e-15);
        for l in 0..4 {
            let (r, c) = net.params.weights[l].dim();
            for (i, j) in [(0, 0), (r - 1, c - 1), (r / 2, 0)] {
                let h = 1e-6;
                let mut p = net.clone();
                p.params.weights[l][[i, j]] += h;
                let mut q = net.clone();
                q.params.weights[l][[i, j]] -= h;
                let fd = (mse_loss(&p, &x, &y).unwrap() - mse_loss(&q, &x, &y).unwrap()) / (2.0 * h);
                assert!((fd - g[l][[i, j]]).abs() <= 1e-5 * fd.abs().max(1e-4), "layer {l}");
            }
        }
    }
}
