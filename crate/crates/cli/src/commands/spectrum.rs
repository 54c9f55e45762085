//! `spectrum-init`: condition number of the activity Hessian at
//! initialisation over a width x depth grid.

use pclab_core::energy::ActivityState;
use pclab_core::hessian::{assemble_linear_hessian, condition_number, hessian_fd, HessianLayout, MAX_HESSIAN_ROWS};
use pclab_core::{Activation, InitScheme, Network, NetworkSpec, Parameterisation, PcError};
use pclab_linalg::gaussian_matrix;
use serde::{Deserialize, Serialize};

use super::{par_map, replicate_seed};
use crate::config::{at_least_one, non_empty, sorted, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "spectrum_init.csv";
pub const HEADER: &[&str] = &[
    "N",
    "H",
    "parameterisation",
    "activation",
    "residual",
    "seed",
    "lambda_min",
    "lambda_max",
    "kappa",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumInitConfig {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    /// Replicates per cell.
    pub seeds: usize,
    pub seed: u64,
    pub param: Parameterisation,
    pub activation: Activation,
    pub residual: bool,
    pub init: Option<InitScheme>,
    /// Input and output sizes; default to the width.
    pub d_in: Option<usize>,
    pub d_out: Option<usize>,
    /// Replace all weights by zeros (every kappa is then 1 without skips).
    pub zero_weights: bool,
}

impl Default for SpectrumInitConfig {
    fn default() -> Self {
        SpectrumInitConfig {
            widths: vec![8, 16, 32],
            depths: vec![2, 4, 8],
            seeds: 3,
            seed: 0,
            param: Parameterisation::Sp,
            activation: Activation::Linear,
            residual: false,
            init: None,
            d_in: None,
            d_out: None,
            zero_weights: false,
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "sp-linear",
        r#"widths = [2, 4, 8, 16, 32, 64, 128]
depths = [2, 4, 8, 16, 32, 64, 128]
seeds = 3
param = "sp"
activation = "linear"
"#,
    ),
    (
        "sp-depth-n128",
        r#"widths = [128]
depths = [2, 4, 8, 16, 32]
seeds = 3
param = "sp"
activation = "linear"
"#,
    ),
    (
        "mupc-resnet",
        r#"widths = [2, 4, 8, 16, 32, 64, 128]
depths = [2, 4, 8, 16, 32, 64, 128]
seeds = 3
param = "mupc"
activation = "linear"
residual = true
"#,
    ),
    (
        "orthogonal",
        r#"widths = [2, 4, 8, 16, 32, 64, 128]
depths = [2, 4, 8, 16, 32, 64, 128]
seeds = 3
param = "orthogonal"
activation = "linear"
"#,
    ),
    (
        "sp-tanh",
        r#"widths = [8, 16, 32, 64]
depths = [2, 4, 8, 16, 32]
seeds = 3
param = "sp"
activation = "tanh"
"#,
    ),
];

struct Cell {
    n: usize,
    h: usize,
    seed: u64,
}

impl SpectrumInitConfig {
    fn network(&self, cell: &Cell) -> pclab_core::Result<Network> {
        let mut spec = NetworkSpec::new(
            self.d_in.unwrap_or(cell.n),
            cell.n,
            cell.h,
            self.d_out.unwrap_or(cell.n),
            self.param,
        )
        .with_activation(self.activation)
        .with_residual(self.residual)
        .with_seed(cell.seed);
        if let Some(i) = self.init {
            spec = spec.with_init(i);
        }
        let net = Network::init(spec)?;
        Ok(if self.zero_weights { net.zeroed() } else { net })
    }

    /// `(lambda_min, lambda_max, kappa)`, or `None` over the row cap.
    fn measure(&self, cell: &Cell) -> pclab_core::Result<Option<(f64, f64, f64)>> {
        let rows = cell.n * cell.h;
        if rows > MAX_HESSIAN_ROWS {
            return Ok(None);
        }
        let net = self.network(cell)?;
        let bundle = if net.is_linear() {
            assemble_linear_hessian(&net, HessianLayout::Supervised)
        } else {
            // One Gaussian sample and target, activities at the forward pass.
            let mut rng = pclab_core::RngStream::new(cell.seed).split(u64::MAX);
            let x = gaussian_matrix(net.spec.d_in, 1, 1.0, &mut rng);
            let y = gaussian_matrix(net.spec.d_out, 1, 1.0, &mut rng);
            hessian_fd(&net, &ActivityState::from_forward(&net, x, Some(y))?)
        };
        match bundle {
            Ok(b) => {
                let s = condition_number(&b)?;
                Ok(Some((s.lambda_min, s.lambda_max, s.kappa)))
            }
            Err(PcError::ResourceCap { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

impl Experiment for SpectrumInitConfig {
    const NAME: &'static str = "spectrum-init";

    fn presets() -> &'static [(&'static str, &'static str)] {
        PRESETS
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> CliResult<()> {
        non_empty("widths", &self.widths)?;
        non_empty("depths", &self.depths)?;
        at_least_one("seeds", self.seeds)?;
        if self.widths.contains(&0) {
            return Err(CliError::Config("widths must be >= 1".into()));
        }
        Ok(())
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let mut cells = Vec::new();
        for &n in &sorted(&self.widths) {
            for &h in &sorted(&self.depths) {
                for r in 0..self.seeds {
                    cells.push(Cell {
                        n,
                        h,
                        seed: replicate_seed(self.seed, r),
                    });
                }
            }
        }
        let results = par_map(&cells, |c| self.measure(c));
        let mut t = Table::new(FILE, HEADER);
        for (c, res) in cells.iter().zip(results) {
            let mut row = vec![
                c.n.to_string(),
                c.h.to_string(),
                self.param.name().into(),
                self.activation.name().into(),
                self.residual.to_string(),
                c.seed.to_string(),
            ];
            match res? {
                Some((lo, hi, k)) => {
                    row.extend([fmt_f64(lo), fmt_f64(hi), fmt_f64(k), "ok".into()]);
                }
                None => row.extend([String::new(), String::new(), String::new(), "skipped".into()]),
            }
            t.push(row);
        }
        Ok(vec![t])
    }
}
