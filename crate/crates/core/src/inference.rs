//! Activity gradients and inference: iterative (GD, Adam) and closed form
//! for linear networks.

use ndarray::{concatenate, s, Axis, Zip};
use pclab_linalg::{cholesky, Matrix};
use serde::{Deserialize, Serialize};

use crate::energy::{report_from, residuals, ActivityState, Residuals};
use crate::hessian::{assemble_linear_hessian, HessianBundle, HessianLayout};
use crate::{Network, PcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimiser {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub steps: usize,
    /// Step size. Energies are batch means, so a GD step moves each sample
    /// by `beta / B` times its own gradient.
    pub beta: f64,
    pub optimiser: Optimiser,
    /// Stop once the activity-gradient norm drops below this.
    pub stop_tolerance: Option<f64>,
    pub record_trajectory: bool,
    /// Activity decay `alpha`; zero disables it.
    #[serde(default)]
    pub decay: f64,
}

impl InferenceConfig {
    pub fn gd(steps: usize, beta: f64) -> Self {
        InferenceConfig {
            steps,
            beta,
            optimiser: Optimiser::Gd,
            stop_tolerance: None,
            record_trajectory: false,
            decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(PcError::InvalidArgument(format!(
                "inference step size must be positive, got {}",
                self.beta
            )));
        }
        if !(self.decay >= 0.0) {
            return Err(PcError::InvalidArgument("activity decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InferenceOutcome {
    pub state: ActivityState,
    pub steps_taken: usize,
    /// Energy before each step and after the last one (`steps_taken + 1`
    /// entries).
    pub energies: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Free activities at every recorded step, starting with the initial
    /// state. Empty unless requested.
    pub trajectory: Vec<Vec<Matrix>>,
}

pub(crate) fn gradient_from(net: &Network, state: &ActivityState, res: &Residuals, alpha: f64) -> Vec<Matrix> {
    let depth = net.depth();
    let inv_b = 1.0 / state.batch_size() as f64;
    let linear = net.is_linear();
    (1..=state.z.len())
        .map(|l| {
            let mut g = res.eps[l - 1].clone();
            if l < depth {
                let next = &res.eps[l];
                let mut back = net.weight(l + 1).t().dot(next);
                let a = net.a(l + 1);
                if !linear {
                    let d = net.activation().derivative(&state.z[l - 1]);
                    Zip::from(&mut back).and(&d).for_each(|b, &dv| *b *= a * dv);
                } else if a != 1.0 {
                    back *= a;
                }
                let tau = net.tau(l + 1);
                if tau != 0.0 {
                    back.scaled_add(tau, next);
                }
                g -= &back;
            }
            if alpha != 0.0 {
                g.scaled_add(alpha, &state.z[l - 1]);
            }
            g *= inv_b;
            g
        })
        .collect()
}

/// `dF/dz_l` for every free layer.
pub fn activity_gradient(net: &Network, state: &ActivityState) -> Result<Vec<Matrix>> {
    activity_gradient_with_decay(net, state, 0.0)
}

pub fn activity_gradient_with_decay(net: &Network, state: &ActivityState, alpha: f64) -> Result<Vec<Matrix>> {
    state.check(net)?;
    let res = residuals(net, state, None);
    Ok(gradient_from(net, state, &res, alpha))
}

pub fn gradient_norm(grads: &[Matrix]) -> f64 {
    grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Iterative inference from `state0`; GD or Adam on the activities.
pub fn infer_gd(net: &Network, state0: &ActivityState, cfg: &InferenceConfig) -> Result<InferenceOutcome> {
    cfg.validate()?;
    state0.check(net)?;
    let mut state = state0.clone();
    let drive = net.predict(1, &state.x, &state.x);
    let mut moments: Option<(Vec<Matrix>, Vec<Matrix>)> = match cfg.optimiser {
        Optimiser::Adam => Some((
            state.z.iter().map(|z| Matrix::zeros(z.raw_dim())).collect(),
            state.z.iter().map(|z| Matrix::zeros(z.raw_dim())).collect(),
        )),
        Optimiser::Gd => None,
    };
    let mut out = InferenceOutcome {
        state: state0.clone(),
        steps_taken: 0,
        energies: Vec::with_capacity(cfg.steps + 1),
        grad_norms: Vec::with_capacity(cfg.steps + 1),
        trajectory: Vec::new(),
    };
    if cfg.record_trajectory {
        out.trajectory.push(state.z.clone());
    }
    let bsz = state.batch_size() as f64;
    for t in 0..=cfg.steps {
        let res = residuals(net, &state, Some(&drive));
        let mut energy = report_from(&res.eps, state.batch_size()).total;
        if cfg.decay > 0.0 {
            let sq: f64 = state.z.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>()).sum();
            energy += 0.5 * cfg.decay * sq / bsz;
        }
        let grads = gradient_from(net, &state, &res, cfg.decay);
        let gn = gradient_norm(&grads);
        out.energies.push(energy);
        out.grad_norms.push(gn);
        if !energy.is_finite() || !gn.is_finite() {
            return Err(PcError::Divergence { step: t });
        }
        if t == cfg.steps || cfg.stop_tolerance.is_some_and(|tol| gn < tol) {
            break;
        }
        match &mut moments {
            None => {
                for (z, g) in state.z.iter_mut().zip(&grads) {
                    z.scaled_add(-cfg.beta, g);
                }
            }
            Some((m, v)) => {
                let k = (t + 1) as i32;
                let c1 = 1.0 - ADAM_B1.powi(k);
                let c2 = 1.0 - ADAM_B2.powi(k);
                for ((z, g), (mi, vi)) in state.z.iter_mut().zip(&grads).zip(m.iter_mut().zip(v.iter_mut())) {
                    Zip::from(z).and(g).and(mi).and(vi).for_each(|z, &g, m, v| {
                        *m = ADAM_B1 * *m + (1.0 - ADAM_B1) * g;
                        *v = ADAM_B2 * *v + (1.0 - ADAM_B2) * g * g;
                        *z -= cfg.beta * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    });
                }
            }
        }
        out.steps_taken += 1;
        if cfg.record_trajectory {
            out.trajectory.push(state.z.clone());
        }
    }
    out.state = state;
    Ok(out)
}

/// Per-sample quadratic form of a linear network's energy:
/// `F = 1/2 z^T H z - b^T z + const`, with `b` holding one column per sample.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub hessian: HessianBundle,
    pub b: Matrix,
}

pub fn assemble_linear_system(net: &Network, x: &Matrix, y: &Matrix) -> Result<LinearSystem> {
    if !net.is_linear() {
        return Err(PcError::Unsupported("linear system needs linear activations".into()));
    }
    net.check_input(x)?;
    if y.dim() != (net.spec.d_out, x.ncols()) {
        return Err(PcError::Dimension(format!(
            "target is {:?}, expected {:?}",
            y.dim(),
            (net.spec.d_out, x.ncols())
        )));
    }
    let hessian = assemble_linear_hessian(net, HessianLayout::Supervised)?;
    let h = net.hidden();
    let n = net.spec.width;
    let mut b = Matrix::zeros((n * h, x.ncols()));
    if h > 0 {
        let first = net.layer_map(1).dot(x);
        b.slice_mut(s![..n, ..]).assign(&first);
        let last = net.layer_map(h + 1).t().dot(y);
        let mut tail = b.slice_mut(s![(h - 1) * n.., ..]);
        tail += &last;
    }
    Ok(LinearSystem { hessian, b })
}

pub(crate) fn stack(z: &[Matrix]) -> Matrix {
    if z.is_empty() {
        return Matrix::zeros((0, 0));
    }
    let views: Vec<_> = z.iter().map(|m| m.view()).collect();
    concatenate(Axis(0), &views).expect("equal batch sizes")
}

pub(crate) fn unstack(m: &Matrix, sizes: &[usize]) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &n in sizes {
        out.push(m.slice(s![start..start + n, ..]).to_owned());
        start += n;
    }
    out
}

/// Closed-form equilibrium `z* = H^{-1} b` of a linear network.
pub fn infer_analytic(net: &Network, x: &Matrix, y: &Matrix) -> Result<ActivityState> {
    let sys = assemble_linear_system(net, x, y)?;
    let z = if net.hidden() == 0 {
        Vec::new()
    } else {
        let sol = cholesky(&sys.hessian.matrix)?.solve_many(sys.b.view())?;
        unstack(&sol, &sys.hessian.block_sizes)
    };
    Ok(ActivityState::clamped(x.clone(), y.clone(), z))
}
