use std::time::Instant;

use ndarray::s;
use pclab_linalg::Matrix;
use serde::{Deserialize, Serialize};

use super::{backprop_gradient, weight_gradient, AdamState};
use crate::data::{argmax_columns, BatchPlan, Dataset};
use crate::energy::{pc_energy, ActivityState};
use crate::hessian::{assemble_linear_hessian, condition_number, hessian_fd, HessianLayout};
use crate::inference::{infer_analytic, infer_gd, InferenceConfig};
use crate::{Network, PcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pc,
    PcAnalyticInference,
    Bp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pc => "pc",
            Algorithm::PcAnalyticInference => "pc_analytic_inference",
            Algorithm::Bp => "bp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Adam learning rate for the weights.
    pub lr: f64,
    pub inference: InferenceConfig,
    pub algorithm: Algorithm,
    /// Test accuracy every this many steps (and always after the last).
    pub eval_every: Option<usize>,
    /// Condition number of the activity Hessian every this many steps.
    pub record_kappa: Option<usize>,
    pub shuffle_seed: u64,
    pub max_steps: Option<usize>,
}

impl TrainConfig {
    /// Batch size 64, forward-initialised activities and `H` GD inference
    /// steps of size `beta`.
    pub fn pc(hidden: usize, lr: f64, beta: f64) -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 64,
            lr,
            inference: InferenceConfig::gd(hidden, beta),
            algorithm: Algorithm::Pc,
            eval_every: None,
            record_kappa: None,
            shuffle_seed: 0,
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(PcError::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(PcError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.algorithm == Algorithm::Pc {
            self.inference.validate()?;
        }
        if self.record_kappa == Some(0) || self.eval_every == Some(0) {
            return Err(PcError::InvalidArgument("periods must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub step: usize,
    pub epoch: usize,
    /// MSE of the batch at the forward pass, before the update.
    pub train_loss: f64,
    /// Energy after inference; absent for BP.
    pub energy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    /// Step at which losses, activities or weights became non-finite.
    pub diverged_at: Option<usize>,
    pub final_test_accuracy: Option<f64>,
    pub wall_clock_secs: f64,
    pub seed: u64,
}

impl TrainLog {
    pub fn min_train_loss(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.train_loss)
            .filter(|v| v.is_finite())
            .reduce(f64::min)
    }
}

/// Fraction of samples whose output argmax matches the label, evaluated in
/// chunks of 1000.
pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    let labels = match &data.labels {
        Some(l) => l.clone(),
        None => argmax_columns(&data.targets),
    };
    if labels.is_empty() {
        return Err(PcError::Data("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    let mut start = 0;
    while start < data.len() {
        let end = (start + 1000).min(data.len());
        let x = data.inputs.slice(s![.., start..end]).to_owned();
        let pred = argmax_columns(&net.output(&x)?);
        correct += pred.iter().zip(&labels[start..end]).filter(|(p, l)| p == l).count();
        start = end;
    }
    Ok(correct as f64 / labels.len() as f64)
}

fn all_finite(ms: &[Matrix]) -> bool {
    ms.iter().all(|m| m.iter().all(|v| v.is_finite()))
}

/// Condition number of the activity Hessian for the first sample of a batch:
/// analytic for linear networks, finite differences at the forward state
/// otherwise.
fn batch_kappa(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64> {
    if net.hidden() == 0 {
        return Ok(1.0);
    }
    let bundle = if net.is_linear() {
        assemble_linear_hessian(net, HessianLayout::Supervised)?
    } else {
        let x1 = x.slice(s![.., 0..1]).to_owned();
        let y1 = y.slice(s![.., 0..1]).to_owned();
        let state = ActivityState::from_forward(net, x1, Some(y1))?;
        hessian_fd(net, &state)?
    };
    Ok(condition_number(&bundle)?.kappa)
}

/// Trains `net` in place: per batch, forward-initialise the activities, run
/// inference (or solve for them), then take one Adam step on the weights.
/// Divergence ends the run early and is reported in the log.
pub fn train(
    net: &mut Network,
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
) -> Result<TrainLog> {
    train_observed(net, cfg, train_set, test_set, &mut |_, _| Ok(()))
}

/// Like [`train`], calling `observe(step, net)` once before the first update
/// and after every update.
pub fn train_observed(
    net: &mut Network,
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    observe: &mut dyn FnMut(usize, &Network) -> Result<()>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train_set.d_in() != net.spec.d_in || train_set.d_out() != net.spec.d_out {
        return Err(PcError::Dimension(format!(
            "dataset is {}->{}, network is {}->{}",
            train_set.d_in(),
            train_set.d_out(),
            net.spec.d_in,
            net.spec.d_out
        )));
    }
    if cfg.algorithm == Algorithm::PcAnalyticInference && !net.is_linear() {
        return Err(PcError::Unsupported(
            "analytic inference training needs a linear network".into(),
        ));
    }
    let clock = Instant::now();
    let plan = BatchPlan::new(cfg.batch_size, true, cfg.shuffle_seed);
    let mut adam = AdamState::new(&net.params.weights);
    let mut log = TrainLog {
        records: Vec::new(),
        diverged_at: None,
        final_test_accuracy: None,
        wall_clock_secs: 0.0,
        seed: net.spec.seed,
    };
    let hidden = net.hidden();
    let mut step = 0usize;
    observe(0, net)?;
    'epochs: for epoch in 0..cfg.epochs {
        for batch in plan.batches(train_set, epoch) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let kappa = match cfg.record_kappa {
                Some(p) if step.is_multiple_of(p) => Some(batch_kappa(net, &batch.x, &batch.y).unwrap_or(f64::NAN)),
                _ => None,
            };
            let outcome: Result<(Vec<Matrix>, f64, Option<f64>)> = (|| match cfg.algorithm {
                Algorithm::Bp => {
                    let (g, loss) = backprop_gradient(net, &batch.x, &batch.y)?;
                    Ok((g, loss, None))
                }
                Algorithm::Pc => {
                    let mut trace = net.forward(&batch.x)?.z;
                    let out = trace.pop().expect("output layer");
                    let diff = &out - &batch.y;
                    let loss = 0.5 * diff.iter().map(|v| v * v).sum::<f64>() / batch.x.ncols() as f64;
                    trace.truncate(hidden);
                    let state = ActivityState::clamped(batch.x.clone(), batch.y.clone(), trace);
                    let (state, energy) = if cfg.inference.steps > 0 {
                        let r = infer_gd(net, &state, &cfg.inference)?;
                        let e = *r.energies.last().expect("at least one energy");
                        (r.state, e)
                    } else {
                        (state, loss)
                    };
                    Ok((weight_gradient(net, &state)?, loss, Some(energy)))
                }
                Algorithm::PcAnalyticInference => {
                    let loss = super::mse_loss(net, &batch.x, &batch.y)?;
                    let state = infer_analytic(net, &batch.x, &batch.y)?;
                    let energy = pc_energy(net, &state)?.total;
                    Ok((weight_gradient(net, &state)?, loss, Some(energy)))
                }
            })();
            let (grads, loss, energy) = match outcome {
                Ok(v) => v,
                Err(PcError::Divergence { .. }) | Err(PcError::Linalg(_)) => {
                    log.diverged_at = Some(step);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !all_finite(&grads) {
                log.diverged_at = Some(step);
                break 'epochs;
            }
            adam.step(&mut net.params.weights, &grads, cfg.lr);
            if !all_finite(&net.params.weights) {
                log.diverged_at = Some(step);
                break 'epochs;
            }
            step += 1;
            observe(step, net)?;
            let test_accuracy = match (test_set, cfg.eval_every) {
                (Some(t), Some(p)) if step.is_multiple_of(p) => Some(accuracy(net, t)?),
                _ => None,
            };
            log.records.push(TrainRecord {
                step,
                epoch,
                train_loss: loss,
                energy,
                test_accuracy,
                kappa,
            });
        }
    }
    if log.diverged_at.is_none() {
        if let Some(t) = test_set {
            let acc = match log.records.last() {
                Some(TrainRecord {
                    test_accuracy: Some(a), ..
                }) => *a,
                _ => accuracy(net, t)?,
            };
            log.final_test_accuracy = Some(acc);
        }
    }
    log.wall_clock_secs = clock.elapsed().as_secs_f64();
    Ok(log)
}
