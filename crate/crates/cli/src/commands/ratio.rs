//! `ratio`: MSE loss over equilibrated energy of linear networks, at
//! initialisation and at checkpoints during PC training.

use std::cell::RefCell;

use pclab_core::inference::InferenceConfig;
use pclab_core::learning::{train_observed, Algorithm, TrainConfig};
use pclab_core::probes::{loss_energy_ratio, RatioRecord};
use pclab_core::{Activation, Network, Parameterisation};
use serde::{Deserialize, Serialize};

use super::train::{network_spec, shuffle_seed};
use super::{par_map, replicate_seed};
use crate::config::{at_least_one, non_empty, positive, sorted, Experiment};
use crate::data::{DataConfig, DatasetName, Splits};
use crate::error::CliResult;
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "ratio.csv";
pub const HEADER: &[&str] = &["parameterisation", "N", "H", "seed", "step", "loss", "energy", "ratio"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioConfig {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub param: Parameterisation,
    pub residual: bool,
    /// Training steps at which the ratio is measured; 0 is initialisation.
    pub checkpoints: Vec<usize>,
    pub lr: f64,
    pub beta: f64,
    pub inference_steps: Option<usize>,
    pub batch_size: usize,
    /// The ratio is measured on the first `eval_size` training samples.
    pub eval_size: usize,
    pub zero_weights: bool,
    pub data: DataConfig,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            widths: vec![8, 32, 128],
            depths: vec![4],
            seeds: 1,
            seed: 0,
            param: Parameterisation::MuPc,
            residual: true,
            checkpoints: vec![0],
            lr: 1e-1,
            beta: 1.0,
            inference_steps: None,
            batch_size: 64,
            eval_size: 256,
            zero_weights: false,
            data: DataConfig {
                name: DatasetName::Teacher,
                d_in: 32,
                d_out: 10,
                ..DataConfig::default()
            },
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "mupc-h4-init",
        r#"widths = [8, 32, 128]
depths = [4]
seeds = 1
param = "mupc"
residual = true
checkpoints = [0]

[data]
name = "teacher"
d_in = 32
d_out = 10
"#,
    ),
    (
        "mupc-phase",
        r#"widths = [2, 4, 8, 16, 32, 64]
depths = [2, 4, 8, 16, 32, 64]
seeds = 1
param = "mupc"
residual = true
checkpoints = [0, 100, 200, 300, 400, 500, 600, 700, 800, 900]
lr = 1e-1
batch_size = 64

[data]
name = "mnist"
"#,
    ),
    (
        "sp-phase",
        r#"widths = [2, 4, 8, 16, 32, 64]
depths = [2, 4, 8, 16, 32, 64]
seeds = 1
param = "sp"
residual = true
checkpoints = [0, 100, 200, 300, 400, 500, 600, 700, 800, 900]
lr = 1e-4
batch_size = 64

[data]
name = "mnist"
"#,
    ),
];

impl RatioConfig {
    fn run_cell(&self, data: &Splits, n: usize, h: usize, seed: u64) -> CliResult<Vec<RatioRecord>> {
        let spec = network_spec(
            data.train.d_in(),
            n,
            h,
            data.train.d_out(),
            self.param,
            Activation::Linear,
            self.residual,
            None,
            seed,
        );
        let mut net = Network::init(spec)?;
        if self.zero_weights {
            net = net.zeroed();
        }
        let eval = data.train.head(self.eval_size.min(data.train.len()));
        let checkpoints = sorted(&self.checkpoints);
        let last = *checkpoints.last().expect("validated non-empty");
        let measure = |step: usize, net: &Network| loss_energy_ratio(net, &eval.inputs, &eval.targets, step);
        if last == 0 {
            return Ok(vec![measure(0, &net)?]);
        }
        let cfg = TrainConfig {
            epochs: usize::MAX,
            batch_size: self.batch_size,
            lr: self.lr,
            inference: InferenceConfig::gd(self.inference_steps.unwrap_or(h), self.beta),
            algorithm: Algorithm::Pc,
            eval_every: None,
            record_kappa: None,
            shuffle_seed: shuffle_seed(seed),
            max_steps: Some(last),
        };
        let out = RefCell::new(Vec::new());
        let log = train_observed(&mut net, &cfg, &data.train, None, &mut |step, net| {
            if checkpoints.binary_search(&step).is_ok() {
                out.borrow_mut().push(measure(step, net)?);
            }
            Ok(())
        })?;
        if let Some(step) = log.diverged_at {
            eprintln!("ratio N={n} H={h}: training diverged at step {step}");
        }
        Ok(out.into_inner())
    }
}

impl Experiment for RatioConfig {
    const NAME: &'static str = "ratio";

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
        non_empty("widths", &self.widths)?;
        non_empty("depths", &self.depths)?;
        non_empty("checkpoints", &self.checkpoints)?;
        at_least_one("seeds", self.seeds)?;
        at_least_one("batch_size", self.batch_size)?;
        at_least_one("eval_size", self.eval_size)?;
        positive("lr", self.lr)?;
        positive("beta", self.beta)?;
        self.data.validate()
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let data = self.data.load()?;
        let mut cells = Vec::new();
        for &n in &sorted(&self.widths) {
            for &h in &sorted(&self.depths) {
                for r in 0..self.seeds {
                    cells.push((n, h, replicate_seed(self.seed, r)));
                }
            }
        }
        let results = par_map(&cells, |&(n, h, s)| self.run_cell(&data, n, h, s));
        let mut t = Table::new(FILE, HEADER);
        for (&(n, h, seed), recs) in cells.iter().zip(results) {
            for r in recs? {
                t.push(vec![
                    self.param.name().into(),
                    n.to_string(),
                    h.to_string(),
                    seed.to_string(),
                    r.step.to_string(),
                    fmt_f64(r.loss),
                    fmt_f64(r.energy),
                    fmt_f64(r.ratio),
                ]);
            }
        }
        Ok(vec![t])
    }
}
