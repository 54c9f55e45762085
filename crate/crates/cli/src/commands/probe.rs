//! `inference-probe`: activity trajectories of GD inference against the
//! analytic equilibrium.

use pclab_core::energy::{pc_energy, ActivityState};
use pclab_core::hessian::{assemble_linear_hessian, condition_number, HessianLayout};
use pclab_core::inference::{activity_gradient, infer_analytic};
use pclab_core::{Activation, InitScheme, Matrix, Network, Parameterisation, RngStream};
use serde::{Deserialize, Serialize};

use super::train::network_spec;
use super::{par_map, replicate_seed};
use crate::config::{non_empty, positive, sorted, Experiment};
use crate::data::{DataConfig, DatasetName};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, fmt_opt, Table};

pub const FILE: &str = "inference_probe.csv";
pub const HEADER: &[&str] = &[
    "init", "beta", "seed", "step", "layer", "value", "analytic", "energy", "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInit {
    Forward,
    Random,
    Zeros,
}

impl ProbeInit {
    pub fn name(self) -> &'static str {
        match self {
            ProbeInit::Forward => "forward",
            ProbeInit::Random => "random",
            ProbeInit::Zeros => "zeros",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub width: usize,
    pub hidden: usize,
    pub param: Parameterisation,
    pub activation: Activation,
    pub residual: bool,
    pub init_scheme: Option<InitScheme>,
    pub inits: Vec<ProbeInit>,
    pub betas: Vec<f64>,
    pub steps: usize,
    pub seeds: usize,
    pub seed: u64,
    /// Index of the probed sample in the training split.
    pub sample: usize,
    pub data: DataConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            width: 1,
            hidden: 64,
            param: Parameterisation::Sp,
            activation: Activation::Linear,
            residual: false,
            init_scheme: None,
            inits: vec![ProbeInit::Forward, ProbeInit::Random],
            betas: vec![0.1, 0.5],
            steps: 64,
            seeds: 1,
            seed: 0,
            sample: 0,
            data: DataConfig {
                name: DatasetName::Toy,
                n_train: 16,
                n_test: 1,
                ..DataConfig::default()
            },
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "sp-scalar-chain",
        r#"width = 1
hidden = 64
param = "sp"
activation = "linear"
inits = ["forward", "random"]
betas = [0.1, 0.5, 1.0]
steps = 64

[data]
name = "toy"
"#,
    ),
    (
        "mupc-wide",
        r#"width = 64
hidden = 64
param = "mupc"
activation = "linear"
residual = true
inits = ["forward", "random"]
betas = [0.1, 0.5, 1.0]
steps = 64

[data]
name = "teacher"
d_in = 16
d_out = 4
"#,
    ),
];

/// Per-layer summary: the value itself for scalar layers, the l2 norm
/// otherwise.
fn summary(z: &Matrix) -> f64 {
    if z.nrows() == 1 {
        z[[0, 0]]
    } else {
        z.column(0).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

struct Trajectory {
    init: ProbeInit,
    beta: f64,
    seed: u64,
    rows: Vec<Vec<String>>,
}

impl ProbeConfig {
    fn network(&self, d_in: usize, d_out: usize, seed: u64) -> pclab_core::Result<Network> {
        let spec = network_spec(
            d_in,
            self.width,
            self.hidden,
            d_out,
            self.param,
            self.activation,
            self.residual,
            self.init_scheme,
            seed,
        );
        Network::init(spec)
    }

    fn trajectory(&self, x: &Matrix, y: &Matrix, init: ProbeInit, beta: f64, seed: u64) -> CliResult<Trajectory> {
        let net = self.network(x.nrows(), y.nrows(), seed)?;
        let mut state = match init {
            ProbeInit::Forward => ActivityState::from_forward(&net, x.clone(), Some(y.clone()))?,
            ProbeInit::Zeros => ActivityState::zeros(&net, x.clone(), Some(y.clone()))?,
            ProbeInit::Random => {
                let mut rng = RngStream::new(seed).split(2);
                ActivityState::gaussian(&net, x.clone(), Some(y.clone()), &mut rng)?
            }
        };
        // GD on a quadratic is stable iff beta < 2 / lambda_max.
        let (analytic, unstable) = if net.is_linear() {
            let z = infer_analytic(&net, x, y)?;
            let lmax = condition_number(&assemble_linear_hessian(&net, HessianLayout::Supervised)?)?.lambda_max;
            (Some(z.z.iter().map(summary).collect::<Vec<_>>()), beta * lmax > 2.0)
        } else {
            (None, false)
        };
        let mut rows = Vec::new();
        for t in 0..=self.steps {
            let energy = pc_energy(&net, &state)?.total;
            let finite = energy.is_finite() && state.z.iter().all(|z| z.iter().all(|v| v.is_finite()));
            let status = match (finite, unstable) {
                (false, _) => "diverged",
                (true, true) => "unstable",
                (true, false) => "ok",
            };
            for (k, z) in state.z.iter().enumerate() {
                rows.push(vec![
                    init.name().into(),
                    fmt_f64(beta),
                    seed.to_string(),
                    t.to_string(),
                    (k + 1).to_string(),
                    fmt_f64(summary(z)),
                    fmt_opt(analytic.as_ref().map(|a| a[k])),
                    fmt_f64(energy),
                    status.into(),
                ]);
            }
            if !finite || t == self.steps {
                break;
            }
            let g = activity_gradient(&net, &state)?;
            for (z, g) in state.z.iter_mut().zip(&g) {
                z.scaled_add(-beta, g);
            }
        }
        Ok(Trajectory { init, beta, seed, rows })
    }
}

impl Experiment for ProbeConfig {
    const NAME: &'static str = "inference-probe";

    fn presets() -> &'static [(&'static str, &'static str)] {
        PRESETS
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn set_data_root(&mut self, root: &std::path::Path) {
        self.data.root = Some(root.to_path_buf());
    }

    fn validate(&self) -> CliResult<()> {
        non_empty("inits", &self.inits)?;
        non_empty("betas", &self.betas)?;
        for &b in &self.betas {
            positive("beta", b)?;
        }
        if self.width == 0 || self.hidden == 0 || self.seeds == 0 {
            return Err(CliError::Config("width, hidden and seeds must be >= 1".into()));
        }
        self.data.validate()
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let data = self.data.load()?;
        if self.sample >= data.train.len() {
            return Err(CliError::Config(format!(
                "sample {} outside the {} training samples",
                self.sample,
                data.train.len()
            )));
        }
        let one = data.train.select(&[self.sample]);
        let mut inits = self.inits.clone();
        inits.sort();
        inits.dedup();
        let mut cells = Vec::new();
        for &init in &inits {
            for &beta in &sorted(&self.betas) {
                for r in 0..self.seeds {
                    cells.push((init, beta, replicate_seed(self.seed, r)));
                }
            }
        }
        let trajs = par_map(&cells, |&(i, b, s)| self.trajectory(&one.inputs, &one.targets, i, b, s));
        let mut t = Table::new(FILE, HEADER);
        for tr in trajs {
            let tr = tr?;
            debug_assert!(tr
                .rows
                .iter()
                .all(|r| r[0] == tr.init.name() && r[1] == fmt_f64(tr.beta) && r[2] == tr.seed.to_string()));
            for r in tr.rows {
                t.push(r);
            }
        }
        Ok(vec![t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(t: &Table, init: &str, beta: f64, step: usize, col: &str) -> Vec<f64> {
        t.rows
            .iter()
            .filter(|r| {
                t.get(r, "init") == init && t.get(r, "beta") == fmt_f64(beta) && t.get(r, "step") == step.to_string()
            })
            .map(|r| t.get_f64(r, col).unwrap())
            .collect()
    }

    #[test]
    fn small_chain_converges_to_the_analytic_solution() {
        let cfg = ProbeConfig {
            hidden: 3,
            inits: vec![ProbeInit::Random],
            betas: vec![0.2],
            steps: 2000,
            ..Default::default()
        };
        let t = &cfg.run().unwrap()[0];
        let z = values(t, "random", 0.2, 2000, "value");
        let a = values(t, "random", 0.2, 2000, "analytic");
        for (z, a) in z.iter().zip(&a) {
            assert!((z - a).abs() < 1e-8, "{z} vs {a}");
        }
    }

    #[test]
    fn large_steps_are_flagged() {
        let cfg = ProbeConfig {
            hidden: 4,
            inits: vec![ProbeInit::Zeros],
            betas: vec![5.0],
            steps: 3000,
            ..Default::default()
        };
        let t = &cfg.run().unwrap()[0];
        let statuses: Vec<&str> = t.rows.iter().map(|r| t.get(r, "status")).collect();
        assert!(statuses.iter().all(|s| *s != "ok"));
        assert_eq!(*statuses.last().unwrap(), "diverged");
    }
}
