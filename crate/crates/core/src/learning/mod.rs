//! Weight gradients, Adam, backpropagation and the training loop.

mod adam;
mod backprop;
mod train;

pub use adam::AdamState;
pub use backprop::{backprop_gradient, mse_loss};
pub use train::{accuracy, train, train_observed, Algorithm, TrainConfig, TrainLog, TrainRecord};

use pclab_linalg::Matrix;

use crate::energy::{residuals, ActivityState};
use crate::{Network, Result};

/// `dF/dW_l = -a_l eps_l phi(z_{l-1})^T / B` for every layer.
pub fn weight_gradient(net: &Network, state: &ActivityState) -> Result<Vec<Matrix>> {
    state.check(net)?;
    let r = residuals(net, state, None);
    let inv_b = 1.0 / state.batch_size() as f64;
    Ok((1..=net.depth())
        .map(|l| {
            let input = if l == 1 { &state.x } else { &r.acts[l - 2] };
            let mut g = r.eps[l - 1].dot(&input.t());
            g *= -net.a(l) * inv_b;
            g
        })
        .collect())
}
