//! `train`: supervised training runs over a width x depth x seed grid.

use pclab_core::inference::{InferenceConfig, Optimiser};
use pclab_core::learning::{train, Algorithm, TrainConfig, TrainLog};
use pclab_core::{Activation, InitScheme, Network, NetworkSpec, Parameterisation, RngStream};
use serde::{Deserialize, Serialize};

use super::{par_map, replicate_seed};
use crate::config::{at_least_one, non_empty, positive, sorted, Experiment};
use crate::data::{DataConfig, Splits};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, fmt_opt, Table};

pub const FILE: &str = "train.csv";
pub const HEADER: &[&str] = &[
    "parameterisation",
    "activation",
    "algorithm",
    "N",
    "H",
    "seed",
    "step",
    "epoch",
    "train_loss",
    "energy",
    "test_accuracy",
    "kappa",
];
pub const SUMMARY_FILE: &str = "train_summary.csv";
pub const SUMMARY_HEADER: &[&str] = &[
    "parameterisation",
    "activation",
    "algorithm",
    "N",
    "H",
    "seed",
    "steps",
    "diverged_at",
    "min_train_loss",
    "final_test_accuracy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub param: Parameterisation,
    pub activation: Activation,
    pub residual: bool,
    pub init: Option<InitScheme>,
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub batch_size: usize,
    /// Adam learning rate of the weights.
    pub lr: f64,
    /// Activity step size.
    pub beta: f64,
    /// Inference steps per batch; defaults to `H`.
    pub inference_steps: Option<usize>,
    pub inference_optimiser: Optimiser,
    pub stop_tolerance: Option<f64>,
    pub eval_every: Option<usize>,
    pub record_kappa: Option<usize>,
    pub max_steps: Option<usize>,
    /// Exit with the numerical-failure code when any run diverges.
    pub fail_on_divergence: bool,
    pub data: DataConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            widths: vec![128],
            depths: vec![8],
            seeds: 1,
            seed: 0,
            param: Parameterisation::MuPc,
            activation: Activation::Relu,
            residual: true,
            init: None,
            algorithm: Algorithm::Pc,
            epochs: 1,
            batch_size: 64,
            lr: 1e-3,
            beta: 1.0,
            inference_steps: None,
            inference_optimiser: Optimiser::Gd,
            stop_tolerance: None,
            eval_every: None,
            record_kappa: None,
            max_steps: None,
            fail_on_divergence: false,
            data: DataConfig::default(),
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "mupc-desk",
        r#"widths = [256]
depths = [16]
seeds = 1
param = "mupc"
activation = "relu"
residual = true
algorithm = "pc"
epochs = 1
batch_size = 64
lr = 1e-1
beta = 5.0
inference_steps = 16
eval_every = 300

[data]
name = "mnist"
"#,
    ),
    (
        "depth-robustness",
        r#"widths = [128]
depths = [8, 64]
seeds = 1
param = "mupc"
activation = "relu"
residual = true
algorithm = "pc"
epochs = 1
batch_size = 64
lr = 1e-1
beta = 5.0

[data]
name = "mnist"
train_subset = 10000
"#,
    ),
    (
        "sp-kappa",
        r#"widths = [128]
depths = [8, 16, 32]
seeds = 1
param = "sp"
activation = "relu"
residual = false
algorithm = "pc"
epochs = 1
batch_size = 64
lr = 1e-3
beta = 0.1
inference_steps = 500
stop_tolerance = 1e-3
record_kappa = 20

[data]
name = "mnist"
"#,
    ),
    (
        "mupc-depths",
        r#"widths = [512]
depths = [8, 16, 32, 64, 128]
seeds = 3
param = "mupc"
activation = "relu"
residual = true
algorithm = "pc"
epochs = 1
batch_size = 64
lr = 1e-1
beta = 5.0
eval_every = 300

[data]
name = "mnist"
"#,
    ),
];

/// One training run of the grid.
pub struct RunResult {
    pub n: usize,
    pub h: usize,
    pub seed: u64,
    pub log: TrainLog,
}

#[allow(clippy::too_many_arguments)]
pub fn network_spec(
    d_in: usize,
    n: usize,
    h: usize,
    d_out: usize,
    param: Parameterisation,
    activation: Activation,
    residual: bool,
    init: Option<InitScheme>,
    seed: u64,
) -> NetworkSpec {
    let spec = NetworkSpec::new(d_in, n, h, d_out, param)
        .with_activation(activation)
        .with_residual(residual)
        .with_seed(seed);
    match init {
        Some(i) => spec.with_init(i),
        None => spec,
    }
}

/// Batch order depends on the replicate seed only, so cells of a grid that
/// share a seed see the same data stream.
pub fn shuffle_seed(seed: u64) -> u64 {
    RngStream::new(seed).split(1).next_u64()
}

impl TrainCmdConfig {
    pub fn train_config(&self, h: usize, seed: u64) -> TrainConfig {
        let mut inference = InferenceConfig::gd(self.inference_steps.unwrap_or(h), self.beta);
        inference.optimiser = self.inference_optimiser;
        inference.stop_tolerance = self.stop_tolerance;
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            inference,
            algorithm: self.algorithm,
            eval_every: self.eval_every,
            record_kappa: self.record_kappa,
            shuffle_seed: shuffle_seed(seed),
            max_steps: self.max_steps,
        }
    }

    pub fn run_one(&self, data: &Splits, n: usize, h: usize, seed: u64) -> CliResult<RunResult> {
        let spec = network_spec(
            data.train.d_in(),
            n,
            h,
            data.train.d_out(),
            self.param,
            self.activation,
            self.residual,
            self.init,
            seed,
        );
        let mut net = Network::init(spec)?;
        let test = data.test.labels.is_some().then_some(&data.test);
        let log = train(&mut net, &self.train_config(h, seed), &data.train, test)?;
        Ok(RunResult { n, h, seed, log })
    }

    pub fn run_grid(&self, data: &Splits) -> CliResult<Vec<RunResult>> {
        let mut cells = Vec::new();
        for &n in &sorted(&self.widths) {
            for &h in &sorted(&self.depths) {
                for r in 0..self.seeds {
                    cells.push((n, h, replicate_seed(self.seed, r)));
                }
            }
        }
        par_map(&cells, |&(n, h, s)| self.run_one(data, n, h, s))
            .into_iter()
            .collect()
    }

    pub fn tables(&self, runs: &[RunResult]) -> (Table, Table) {
        let mut t = Table::new(FILE, HEADER);
        let mut s = Table::new(SUMMARY_FILE, SUMMARY_HEADER);
        for run in runs {
            let key = || {
                vec![
                    self.param.name().to_string(),
                    self.activation.name().to_string(),
                    self.algorithm.name().to_string(),
                    run.n.to_string(),
                    run.h.to_string(),
                    run.seed.to_string(),
                ]
            };
            for r in &run.log.records {
                let mut row = key();
                row.extend([
                    r.step.to_string(),
                    r.epoch.to_string(),
                    fmt_f64(r.train_loss),
                    fmt_opt(r.energy),
                    fmt_opt(r.test_accuracy),
                    fmt_opt(r.kappa),
                ]);
                t.push(row);
            }
            let mut row = key();
            row.extend([
                run.log.records.len().to_string(),
                run.log.diverged_at.map(|d| d.to_string()).unwrap_or_default(),
                fmt_opt(run.log.min_train_loss()),
                fmt_opt(run.log.final_test_accuracy),
            ]);
            s.push(row);
        }
        (t, s)
    }
}

impl Experiment for TrainCmdConfig {
    const NAME: &'static str = "train";

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
        at_least_one("seeds", self.seeds)?;
        at_least_one("epochs", self.epochs)?;
        at_least_one("batch_size", self.batch_size)?;
        positive("lr", self.lr)?;
        positive("beta", self.beta)?;
        self.data.validate()?;
        for &h in &self.depths {
            self.train_config(h, 0).validate()?;
        }
        Ok(())
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let data = self.data.load()?;
        let runs = self.run_grid(&data)?;
        for r in &runs {
            eprintln!(
                "train N={} H={} seed={}: {} steps in {:.1}s, accuracy {}",
                r.n,
                r.h,
                r.seed,
                r.log.records.len(),
                r.log.wall_clock_secs,
                r.log
                    .final_test_accuracy
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_else(|| "n/a".into())
            );
        }
        let (t, s) = self.tables(&runs);
        Ok(vec![t, s])
    }

    fn check_outcome(&self, tables: &[Table]) -> CliResult<()> {
        if !self.fail_on_divergence {
            return Ok(());
        }
        let s = tables.iter().find(|t| t.file == SUMMARY_FILE).expect("summary table");
        let diverged = s.rows.iter().filter(|r| !s.get(r, "diverged_at").is_empty()).count();
        if diverged > 0 {
            return Err(CliError::Numerical(format!(
                "{diverged} of {} runs diverged",
                s.rows.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetName;

    fn small() -> TrainCmdConfig {
        TrainCmdConfig {
            widths: vec![8],
            depths: vec![2],
            activation: Activation::Tanh,
            lr: 1e-2,
            beta: 0.5,
            eval_every: Some(5),
            record_kappa: Some(4),
            data: DataConfig {
                name: DatasetName::Separable,
                n_train: 320,
                n_test: 64,
                d_in: 6,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn logs_every_step_and_kappa_every_period() {
        let tables = small().run().unwrap();
        let t = &tables[0];
        assert_eq!(t.rows.len(), 5);
        for (i, r) in t.rows.iter().enumerate() {
            assert_eq!(t.get(r, "step"), (i + 1).to_string());
            assert_eq!(t.get(r, "kappa").is_empty(), i % 4 != 0);
        }
        assert!(t.get_f64(&t.rows[4], "test_accuracy").is_some());
        let s = &tables[1];
        assert_eq!(s.get(&s.rows[0], "steps"), "5");
        assert_eq!(s.get(&s.rows[0], "diverged_at"), "");
    }

    #[test]
    fn divergence_is_reported_and_can_fail_the_run() {
        let mut cfg = small();
        cfg.beta = 1e200;
        cfg.fail_on_divergence = true;
        let tables = cfg.run().unwrap();
        assert_eq!(tables[1].get(&tables[1].rows[0], "diverged_at"), "0");
        assert_eq!(cfg.check_outcome(&tables).unwrap_err().exit_code(), 3);
    }
}
