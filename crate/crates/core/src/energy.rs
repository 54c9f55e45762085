//! PC and equilibrium-propagation energies.

use ndarray::Zip;
use pclab_linalg::{gaussian_matrix, Matrix, RngStream};

use crate::{Network, PcError, Result};

/// Free activities plus clamped data. With a clamped output, `z` holds
/// `z_1..z_H` and `y` is the output layer; otherwise `z` holds `z_1..z_L`
/// and `y` (if any) is only a target, as in equilibrium propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityState {
    pub x: Matrix,
    pub y: Option<Matrix>,
    pub z: Vec<Matrix>,
    pub clamp_output: bool,
}

impl ActivityState {
    pub fn clamped(x: Matrix, y: Matrix, z: Vec<Matrix>) -> Self {
        ActivityState {
            x,
            y: Some(y),
            z,
            clamp_output: true,
        }
    }

    pub fn unclamped(x: Matrix, z: Vec<Matrix>) -> Self {
        ActivityState {
            x,
            y: None,
            z,
            clamp_output: false,
        }
    }

    /// Free output with a nudging target.
    pub fn free_output(x: Matrix, y: Matrix, z: Vec<Matrix>) -> Self {
        ActivityState {
            x,
            y: Some(y),
            z,
            clamp_output: false,
        }
    }

    /// Activities from the forward pass; the output is clamped to `y` if
    /// given and left at the forward prediction otherwise.
    pub fn from_forward(net: &Network, x: Matrix, y: Option<Matrix>) -> Result<Self> {
        let mut trace = net.forward(&x)?.z;
        match y {
            Some(y) => {
                trace.pop();
                let s = ActivityState::clamped(x, y, trace);
                s.check(net)?;
                Ok(s)
            }
            None => Ok(ActivityState::unclamped(x, trace)),
        }
    }

    pub fn zeros(net: &Network, x: Matrix, y: Option<Matrix>) -> Result<Self> {
        let b = x.ncols();
        let dims = net.dims();
        let n_free = if y.is_some() { net.hidden() } else { net.depth() };
        let z = (1..=n_free).map(|l| Matrix::zeros((dims[l], b))).collect();
        let s = ActivityState {
            x,
            clamp_output: y.is_some(),
            y,
            z,
        };
        s.check(net)?;
        Ok(s)
    }

    /// Standard Gaussian activities per unit.
    pub fn gaussian(net: &Network, x: Matrix, y: Option<Matrix>, rng: &mut RngStream) -> Result<Self> {
        let mut s = ActivityState::zeros(net, x, y)?;
        for z in &mut s.z {
            *z = gaussian_matrix(z.nrows(), z.ncols(), 1.0, rng);
        }
        Ok(s)
    }

    pub fn batch_size(&self) -> usize {
        self.x.ncols()
    }

    /// Activity of layer `l` (0 = input, `L` = output).
    pub fn layer(&self, l: usize, depth: usize) -> &Matrix {
        if l == 0 {
            &self.x
        } else if l == depth && self.clamp_output {
            self.y.as_ref().expect("clamped output needs a target")
        } else {
            &self.z[l - 1]
        }
    }

    pub fn check(&self, net: &Network) -> Result<()> {
        net.check_input(&self.x)?;
        let dims = net.dims();
        let b = self.batch_size();
        let n_free = if self.clamp_output { net.hidden() } else { net.depth() };
        if self.z.len() != n_free {
            return Err(PcError::Dimension(format!(
                "expected {n_free} free layers, got {}",
                self.z.len()
            )));
        }
        for (k, z) in self.z.iter().enumerate() {
            if z.dim() != (dims[k + 1], b) {
                return Err(PcError::Dimension(format!(
                    "z_{} is {:?}, expected {:?}",
                    k + 1,
                    z.dim(),
                    (dims[k + 1], b)
                )));
            }
        }
        if self.clamp_output && self.y.is_none() {
            return Err(PcError::Dimension("clamped output without target".into()));
        }
        if let Some(y) = &self.y {
            if y.dim() != (net.spec.d_out, b) {
                return Err(PcError::Dimension(format!(
                    "target is {:?}, expected {:?}",
                    y.dim(),
                    (net.spec.d_out, b)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `F_1..F_L`.
    pub per_layer: Vec<f64>,
    /// Activity-decay contribution, zero unless requested.
    pub decay: f64,
    pub total: f64,
    pub batch_size: usize,
}

/// Layer residuals `eps_l = z_l - a_l W_l phi(z_{l-1}) - tau_l z_{l-1}` and
/// hidden activations `phi(z_l)`.
pub(crate) struct Residuals {
    pub eps: Vec<Matrix>,
    /// `phi(z_l)` for `l = 1..=H`.
    pub acts: Vec<Matrix>,
}

/// `drive` optionally supplies the cached first-layer prediction `a_1 W_1 x`,
/// which stays fixed during inference.
pub(crate) fn residuals(net: &Network, state: &ActivityState, drive: Option<&Matrix>) -> Residuals {
    let depth = net.depth();
    let act = net.activation();
    let acts: Vec<Matrix> = (1..depth).map(|l| act.apply(state.layer(l, depth))).collect();
    let eps = (1..=depth)
        .map(|l| {
            let mu = if l == 1 {
                match drive {
                    Some(d) => d.clone(),
                    None => net.predict(1, &state.x, &state.x),
                }
            } else {
                net.predict(l, state.layer(l - 1, depth), &acts[l - 2])
            };
            let mut e = state.layer(l, depth).clone();
            e -= &mu;
            e
        })
        .collect();
    Residuals { eps, acts }
}

pub(crate) fn report_from(eps: &[Matrix], batch: usize) -> EnergyReport {
    let per_layer: Vec<f64> = eps
        .iter()
        .map(|e| 0.5 * e.iter().map(|v| v * v).sum::<f64>() / batch as f64)
        .collect();
    let total = per_layer.iter().sum();
    EnergyReport {
        per_layer,
        decay: 0.0,
        total,
        batch_size: batch,
    }
}

pub fn pc_energy(net: &Network, state: &ActivityState) -> Result<EnergyReport> {
    state.check(net)?;
    let r = residuals(net, state, None);
    Ok(report_from(&r.eps, state.batch_size()))
}

/// Adds `(alpha/2) sum_l |z_l|^2 / B` over the free layers.
pub fn pc_energy_with_decay(net: &Network, state: &ActivityState, alpha: f64) -> Result<EnergyReport> {
    if !(alpha >= 0.0) {
        return Err(PcError::InvalidArgument(format!("decay must be >= 0, got {alpha}")));
    }
    let mut rep = pc_energy(net, state)?;
    if alpha > 0.0 {
        let sq: f64 = state.z.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>()).sum();
        rep.decay = 0.5 * alpha * sq / state.batch_size() as f64;
        rep.total += rep.decay;
    }
    Ok(rep)
}

/// Equilibrium-propagation energy of a deep linear network with free output:
/// `1/2 sum_l |z_l|^2 - sum_l z_l^T a_l W_l z_{l-1} + beta/2 |y - z_L|^2`,
/// batch mean. `l2 = false` drops the first term. `per_layer[l-1]` holds the
/// layer-`l` share of the first two terms; the nudge goes into `decay`.
pub fn ep_energy(net: &Network, state: &ActivityState, beta: f64, l2: bool) -> Result<EnergyReport> {
    if !net.is_linear() || net.spec.residual {
        return Err(PcError::Unsupported(
            "equilibrium-propagation energy is defined for linear networks without skips".into(),
        ));
    }
    if !(beta >= 0.0) {
        return Err(PcError::InvalidArgument(format!("nudge must be >= 0, got {beta}")));
    }
    if state.clamp_output {
        return Err(PcError::InvalidArgument("EP state needs a free output layer".into()));
    }
    state.check(net)?;
    let depth = net.depth();
    let bsz = state.batch_size() as f64;
    let per_layer: Vec<f64> = (1..=depth)
        .map(|l| {
            let z = state.layer(l, depth);
            let prev = state.layer(l - 1, depth);
            let drive = net.weight(l).dot(prev);
            let mut s = -net.a(l) * Zip::from(z).and(&drive).fold(0.0, |acc, &p, &q| acc + p * q);
            if l2 {
                s += 0.5 * z.iter().map(|v| v * v).sum::<f64>();
            }
            s / bsz
        })
        .collect();
    let nudge = match (&state.y, beta > 0.0) {
        (Some(y), true) => {
            let zl = state.layer(depth, depth);
            0.5 * beta * Zip::from(y).and(zl).fold(0.0, |acc, &p, &q| acc + (p - q).powi(2)) / bsz
        }
        (None, true) => {
            return Err(PcError::InvalidArgument("nudge requires a target".into()));
        }
        _ => 0.0,
    };
    let total = per_layer.iter().sum::<f64>() + nudge;
    Ok(EnergyReport {
        per_layer,
        decay: nudge,
        total,
        batch_size: state.batch_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{NetworkSpec, Parameterisation};

    fn m(v: f64) -> Matrix {
        Matrix::from_elem((1, 1), v)
    }

    #[test]
    fn forward_state_leaves_only_output_energy() {
        let spec = NetworkSpec::new(5, 8, 3, 2, Parameterisation::Sp)
            .with_activation(crate::Activation::Tanh)
            .with_seed(4);
        let net = Network::init(spec).unwrap();
        let mut rng = RngStream::new(1);
        let x = gaussian_matrix(5, 6, 1.0, &mut rng);
        let y = gaussian_matrix(2, 6, 1.0, &mut rng);
        let f = net.output(&x).unwrap();
        let s = ActivityState::from_forward(&net, x, Some(y.clone())).unwrap();
        let rep = pc_energy(&net, &s).unwrap();
        for &h in &rep.per_layer[..3] {
            assert!(h < 1e-12);
        }
        let mse = 0.5 * (&y - &f).mapv(|v| v * v).sum() / 6.0;
        assert!((rep.per_layer[3] - mse).abs() < 1e-14);
    }

    #[test]
    fn scalar_energy_by_hand() {
        let net = Network::scalar(Parameterisation::Sp, &[1.0, 1.0], false).unwrap();
        let s = ActivityState::clamped(m(1.0), m(0.0), vec![m(0.5)]);
        let rep = pc_energy(&net, &s).unwrap();
        assert!((rep.total - 0.25).abs() < 1e-15);
        assert_eq!(rep.per_layer, vec![0.125, 0.125]);
    }

    #[test]
    fn decay_term() {
        let net = Network::scalar(Parameterisation::Sp, &[1.0, 1.0], false).unwrap();
        let s = ActivityState::clamped(m(1.0), m(0.0), vec![m(2.0)]);
        let base = pc_energy(&net, &s).unwrap();
        assert_eq!(pc_energy_with_decay(&net, &s, 0.0).unwrap(), base);
        let d = pc_energy_with_decay(&net, &s, 1.0).unwrap();
        assert!((d.total - base.total - 2.0).abs() < 1e-15);
        let zero = ActivityState::clamped(m(1.0), m(0.0), vec![m(0.0)]);
        assert_eq!(pc_energy_with_decay(&net, &zero, 1.0).unwrap().decay, 0.0);
        assert!(pc_energy_with_decay(&net, &s, -1.0).is_err());
    }

    #[test]
    fn ep_energy_cases() {
        let net = Network::scalar(Parameterisation::Sp, &[1.0, 1.0], false).unwrap();
        let zero = ActivityState::free_output(m(0.0), m(0.0), vec![m(0.0), m(0.0)]);
        assert_eq!(ep_energy(&net, &zero, 0.0, true).unwrap().total, 0.0);
        let s = ActivityState::free_output(m(1.0), m(0.0), vec![m(1.0), m(2.0)]);
        assert!((ep_energy(&net, &s, 0.0, true).unwrap().total + 0.5).abs() < 1e-15);
        let nz = ActivityState::free_output(m(0.0), m(1.0), vec![m(0.0), m(0.0)]);
        assert!((ep_energy(&net, &nz, 2.0, true).unwrap().total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ep_rejects_nonlinear() {
        let spec = NetworkSpec::new(1, 1, 1, 1, Parameterisation::Sp).with_activation(crate::Activation::Relu);
        let net = Network::init(spec).unwrap();
        let s = ActivityState::free_output(m(0.0), m(0.0), vec![m(0.0), m(0.0)]);
        assert!(matches!(ep_energy(&net, &s, 0.0, true), Err(PcError::Unsupported(_))));
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = Network::scalar(Parameterisation::Sp, &[1.0, 1.0], false).unwrap();
        let s = ActivityState::clamped(m(1.0), m(0.0), vec![]);
        assert!(matches!(pc_energy(&net, &s), Err(PcError::Dimension(_))));
    }
}
