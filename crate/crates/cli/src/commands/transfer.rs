//! `transfer-grid`: minimum training loss over a grid of weight and
//! activity learning rates, for several network shapes.

use pclab_core::inference::InferenceConfig;
use pclab_core::learning::{train, Algorithm, TrainConfig};
use pclab_core::{Activation, InitScheme, Network, Parameterisation};
use serde::{Deserialize, Serialize};

use super::train::{network_spec, shuffle_seed};
use super::{par_map, replicate_seed};
use crate::config::{at_least_one, non_empty, positive, sorted, Experiment};
use crate::data::{DataConfig, Splits};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "transfer_grid.csv";
pub const HEADER: &[&str] = &["N", "H", "eta", "beta", "min_train_loss", "n_seeds", "n_diverged"];
pub const RUNS_FILE: &str = "transfer_runs.csv";
pub const RUNS_HEADER: &[&str] = &["N", "H", "eta", "beta", "seed", "min_train_loss", "diverged"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    /// `[N, H]` pairs.
    pub shapes: Vec<[usize; 2]>,
    pub etas: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
    pub param: Parameterisation,
    pub activation: Activation,
    pub residual: bool,
    pub init: Option<InitScheme>,
    pub epochs: usize,
    pub batch_size: usize,
    pub inference_steps: Option<usize>,
    pub max_steps: Option<usize>,
    pub data: DataConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            shapes: vec![[64, 8], [128, 8], [64, 16]],
            etas: vec![5e-1, 1e-1, 5e-2, 1e-2],
            betas: vec![1e1, 1e0, 1e-1],
            seeds: 3,
            seed: 0,
            param: Parameterisation::MuPc,
            activation: Activation::Relu,
            residual: true,
            init: None,
            epochs: 1,
            batch_size: 64,
            inference_steps: None,
            max_steps: None,
            data: DataConfig::default(),
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "reduced",
        r#"shapes = [[64, 8], [128, 8], [64, 16]]
etas = [5e-1, 1e-1, 5e-2, 1e-2]
betas = [1e1, 1e0, 1e-1]
seeds = 3
param = "mupc"
activation = "relu"
residual = true
epochs = 1
batch_size = 64
max_steps = 150

[data]
name = "mnist"
train_subset = 9600
"#,
    ),
    (
        "full-width",
        r#"shapes = [[64, 8], [128, 8], [256, 8], [512, 8], [1024, 8]]
etas = [5e-1, 1e-1, 5e-2, 1e-2]
betas = [1e3, 5e2, 1e2, 5e1, 1e1, 5e0, 1e0, 5e-1, 1e-1, 5e-2, 1e-2]
seeds = 3
param = "mupc"
activation = "tanh"
residual = true
epochs = 1
batch_size = 64

[data]
name = "mnist"
"#,
    ),
    (
        "full-depth",
        r#"shapes = [[512, 8], [512, 16], [512, 32], [512, 64], [512, 128]]
etas = [5e-1, 1e-1, 5e-2, 1e-2]
betas = [1e3, 5e2, 1e2, 5e1, 1e1, 5e0, 1e0, 5e-1, 1e-1, 5e-2, 1e-2]
seeds = 3
param = "mupc"
activation = "tanh"
residual = true
epochs = 1
batch_size = 64

[data]
name = "mnist"
"#,
    ),
];

/// `(min train loss, diverged)` of one run.
pub type CellResult = (f64, bool);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub h: usize,
    pub eta: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Seed-averaged minimum training loss of one `(N, H, eta, beta)` cell.
/// A diverged replicate makes the cell's loss infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub h: usize,
    pub eta: f64,
    pub beta: f64,
    pub min_train_loss: f64,
    pub n_diverged: usize,
}

impl TransferConfig {
    fn cells(&self) -> Vec<Cell> {
        let mut shapes = self.shapes.clone();
        shapes.sort();
        shapes.dedup();
        let mut out = Vec::new();
        for [n, h] in shapes {
            for &eta in &sorted(&self.etas) {
                for &beta in &sorted(&self.betas) {
                    for r in 0..self.seeds {
                        out.push(Cell {
                            n,
                            h,
                            eta,
                            beta,
                            seed: replicate_seed(self.seed, r),
                        });
                    }
                }
            }
        }
        out
    }

    /// `(min train loss, diverged)`; a diverged run reports the minimum
    /// reached before it blew up.
    fn run_cell(&self, data: &Splits, c: &Cell) -> CliResult<CellResult> {
        let spec = network_spec(
            data.train.d_in(),
            c.n,
            c.h,
            data.train.d_out(),
            self.param,
            self.activation,
            self.residual,
            self.init,
            c.seed,
        );
        let mut net = Network::init(spec)?;
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: c.eta,
            inference: InferenceConfig::gd(self.inference_steps.unwrap_or(c.h), c.beta),
            algorithm: Algorithm::Pc,
            eval_every: None,
            record_kappa: None,
            shuffle_seed: shuffle_seed(c.seed),
            max_steps: self.max_steps,
        };
        let log = train(&mut net, &cfg, &data.train, None)?;
        Ok((log.min_train_loss().unwrap_or(f64::INFINITY), log.diverged_at.is_some()))
    }

    pub fn run_cells(&self, data: &Splits) -> CliResult<(Vec<Cell>, Vec<CellResult>)> {
        let cells = self.cells();
        let res: CliResult<Vec<_>> = par_map(&cells, |c| self.run_cell(data, c)).into_iter().collect();
        Ok((cells, res?))
    }

    pub fn aggregate(&self, cells: &[Cell], res: &[CellResult]) -> Vec<GridPoint> {
        let mut out: Vec<GridPoint> = Vec::new();
        for (c, &(loss, div)) in cells.iter().zip(res) {
            let v = if div { f64::INFINITY } else { loss };
            match out.last_mut() {
                Some(p) if (p.n, p.h, p.eta, p.beta) == (c.n, c.h, c.eta, c.beta) => {
                    p.min_train_loss += v;
                    p.n_diverged += usize::from(div);
                }
                _ => out.push(GridPoint {
                    n: c.n,
                    h: c.h,
                    eta: c.eta,
                    beta: c.beta,
                    min_train_loss: v,
                    n_diverged: usize::from(div),
                }),
            }
        }
        for p in &mut out {
            p.min_train_loss /= self.seeds as f64;
        }
        out
    }
}

/// Grid indices `(eta, beta)` of the lowest finite loss for shape `(n, h)`,
/// indexing the sorted `etas` and `betas`.
pub fn argmin_cell(points: &[GridPoint], n: usize, h: usize, etas: &[f64], betas: &[f64]) -> Option<(usize, usize)> {
    let etas = sorted(etas);
    let betas = sorted(betas);
    points
        .iter()
        .filter(|p| p.n == n && p.h == h && p.min_train_loss.is_finite())
        .min_by(|a, b| a.min_train_loss.total_cmp(&b.min_train_loss))
        .map(|p| {
            let i = etas.iter().position(|&e| e == p.eta).expect("eta on grid");
            let j = betas.iter().position(|&b| b == p.beta).expect("beta on grid");
            (i, j)
        })
}

impl Experiment for TransferConfig {
    const NAME: &'static str = "transfer-grid";

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
        non_empty("shapes", &self.shapes)?;
        non_empty("etas", &self.etas)?;
        non_empty("betas", &self.betas)?;
        at_least_one("seeds", self.seeds)?;
        at_least_one("epochs", self.epochs)?;
        at_least_one("batch_size", self.batch_size)?;
        for &v in self.etas.iter().chain(&self.betas) {
            positive("learning rate", v)?;
        }
        if self.shapes.iter().any(|s| s[0] == 0) {
            return Err(CliError::Config("shape widths must be >= 1".into()));
        }
        self.data.validate()
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let data = self.data.load()?;
        let (cells, res) = self.run_cells(&data)?;
        let mut runs = Table::new(RUNS_FILE, RUNS_HEADER);
        for (c, &(loss, div)) in cells.iter().zip(&res) {
            runs.push(vec![
                c.n.to_string(),
                c.h.to_string(),
                fmt_f64(c.eta),
                fmt_f64(c.beta),
                c.seed.to_string(),
                fmt_f64(loss),
                div.to_string(),
            ]);
        }
        let mut grid = Table::new(FILE, HEADER);
        for p in self.aggregate(&cells, &res) {
            grid.push(vec![
                p.n.to_string(),
                p.h.to_string(),
                fmt_f64(p.eta),
                fmt_f64(p.beta),
                fmt_f64(p.min_train_loss),
                self.seeds.to_string(),
                p.n_diverged.to_string(),
            ]);
        }
        Ok(vec![grid, runs])
    }
}
