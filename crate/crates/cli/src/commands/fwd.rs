//! `fwd-stability`: per-layer activity norms of the forward pass at
//! initialisation, across depths and parameterisations.

use pclab_core::{forward_norm_profile, Activation, InitScheme, Parameterisation, RngStream};
use serde::{Deserialize, Serialize};

use super::par_map;
use super::train::network_spec;
use crate::config::{at_least_one, non_empty, sorted, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "fwd_stability.csv";
pub const HEADER: &[&str] = &[
    "parameterisation",
    "activation",
    "residual",
    "init",
    "L",
    "layer",
    "mean_abs",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub param: Parameterisation,
    pub activation: Activation,
    pub residual: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwdConfig {
    pub width: usize,
    /// Total depths `L = H + 1`.
    pub depths: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
}

impl Default for FwdConfig {
    fn default() -> Self {
        let v = |param, activation, residual, init| Variant {
            param,
            activation,
            residual,
            init,
        };
        FwdConfig {
            width: 256,
            depths: vec![8, 16, 32, 64, 128],
            n_samples: 64,
            seed: 0,
            variants: vec![
                v(Parameterisation::MuPc, Activation::Tanh, true, None),
                v(Parameterisation::Sp, Activation::Linear, true, None),
                v(
                    Parameterisation::Sp,
                    Activation::Tanh,
                    false,
                    Some(InitScheme::KaimingUniform),
                ),
            ],
        }
    }
}

const PRESETS: &[(&str, &str)] = &[(
    "depth-sweep",
    r#"width = 256
depths = [8, 16, 32, 64, 128]
n_samples = 64

[[variants]]
param = "mupc"
activation = "tanh"
residual = true

[[variants]]
param = "mupc"
activation = "relu"
residual = true

[[variants]]
param = "mupc"
activation = "linear"
residual = true

[[variants]]
param = "sp"
activation = "linear"
residual = true

[[variants]]
param = "sp"
activation = "tanh"
residual = false
init = "kaiming_uniform"

[[variants]]
param = "orthogonal"
activation = "tanh"
residual = false

[[variants]]
param = "orthogonal"
activation = "relu"
residual = false
"#,
)];

/// Mean absolute activity of the last hidden layer (layer `L - 1`, or the
/// only layer when `L = 1`) of the depth-`L` network: one number per depth.
/// The output layer is left out because µPC deliberately shrinks it.
pub fn depth_summary(t: &Table, v: &Variant, depth: usize) -> Option<f64> {
    let init = v.init.map(|i| i.name()).unwrap_or("default");
    let layer = depth.saturating_sub(1).max(1).to_string();
    t.rows
        .iter()
        .find(|r| {
            t.get(r, "parameterisation") == v.param.name()
                && t.get(r, "activation") == v.activation.name()
                && t.get(r, "residual") == v.residual.to_string()
                && t.get(r, "init") == init
                && t.get(r, "L") == depth.to_string()
                && t.get(r, "layer") == layer
        })
        .and_then(|r| t.get_f64(r, "mean_abs"))
}

impl Experiment for FwdConfig {
    const NAME: &'static str = "fwd-stability";

    fn presets() -> &'static [(&'static str, &'static str)] {
        PRESETS
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> CliResult<()> {
        at_least_one("width", self.width)?;
        at_least_one("n_samples", self.n_samples)?;
        non_empty("depths", &self.depths)?;
        non_empty("variants", &self.variants)?;
        if self.depths.contains(&0) {
            return Err(CliError::Config("depths count layers and must be >= 1".into()));
        }
        Ok(())
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let mut cells = Vec::new();
        for (k, v) in self.variants.iter().enumerate() {
            for &l in &sorted(&self.depths) {
                cells.push((k, v, l));
            }
        }
        let n = self.width;
        let profiles = par_map(&cells, |&(k, v, l)| {
            // Same inputs for every depth of a variant; weights from the seed.
            let spec = network_spec(n, n, l - 1, n, v.param, v.activation, v.residual, v.init, self.seed);
            let mut rng = RngStream::new(self.seed).split(1 + k as u64);
            forward_norm_profile(&spec, &mut rng, self.n_samples)
        });
        let mut t = Table::new(FILE, HEADER);
        for (&(_, v, l), prof) in cells.iter().zip(profiles) {
            for (i, m) in prof?.iter().enumerate() {
                t.push(vec![
                    v.param.name().into(),
                    v.activation.name().into(),
                    v.residual.to_string(),
                    v.init.map(|i| i.name()).unwrap_or("default").into(),
                    l.to_string(),
                    (i + 1).to_string(),
                    fmt_f64(*m),
                ]);
            }
        }
        Ok(vec![t])
    }
}
