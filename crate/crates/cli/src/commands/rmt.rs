//! `rmt-spectra`: eigenvalues of the activity Hessian and of its split
//! `H = D + O` into block-diagonal and off-diagonal parts.

use pclab_core::hessian::{assemble_linear_hessian, hessian_decomposition_spectra, spectrum_summary, HessianLayout};
use pclab_core::{Network, NetworkSpec, Parameterisation};
use serde::{Deserialize, Serialize};

use super::{par_map, replicate_seed};
use crate::config::{at_least_one, Experiment};
use crate::error::CliResult;
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "rmt_spectra.csv";
pub const HEADER: &[&str] = &["N", "H", "seed", "matrix", "index", "eigenvalue"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmtSpectraConfig {
    pub width: usize,
    pub hidden: usize,
    pub seeds: usize,
    pub seed: u64,
    pub param: Parameterisation,
}

impl Default for RmtSpectraConfig {
    fn default() -> Self {
        RmtSpectraConfig {
            width: 64,
            hidden: 8,
            seeds: 1,
            seed: 0,
            param: Parameterisation::Sp,
        }
    }
}

const PRESETS: &[(&str, &str)] = &[(
    "sp-n512-h8",
    r#"width = 512
hidden = 8
seeds = 1
param = "sp"
"#,
)];

pub struct Spectra {
    pub seed: u64,
    pub d: Vec<f64>,
    pub o: Vec<f64>,
    pub h: Vec<f64>,
}

impl RmtSpectraConfig {
    /// Square linear fully connected net (`d_in = d_out = N`), so every
    /// weight block is `N x N`.
    pub fn spectra(&self, seed: u64) -> pclab_core::Result<Spectra> {
        let n = self.width;
        let spec = NetworkSpec::new(n, n, self.hidden, n, self.param).with_seed(seed);
        let bundle = assemble_linear_hessian(&Network::init(spec)?, HessianLayout::Supervised)?;
        let (d, o) = hessian_decomposition_spectra(&bundle)?;
        let h = spectrum_summary(&bundle, true)?.eigenvalues.expect("kept");
        Ok(Spectra { seed, d, o, h })
    }
}

impl Experiment for RmtSpectraConfig {
    const NAME: &'static str = "rmt-spectra";

    fn presets() -> &'static [(&'static str, &'static str)] {
        PRESETS
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> CliResult<()> {
        at_least_one("width", self.width)?;
        at_least_one("hidden", self.hidden)?;
        at_least_one("seeds", self.seeds)
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let seeds: Vec<u64> = (0..self.seeds).map(|r| replicate_seed(self.seed, r)).collect();
        let all = par_map(&seeds, |&s| self.spectra(s));
        let mut t = Table::new(FILE, HEADER);
        for sp in all {
            let sp = sp?;
            for (name, vals) in [("D", &sp.d), ("O", &sp.o), ("H", &sp.h)] {
                for (i, v) in vals.iter().enumerate() {
                    t.push(vec![
                        self.width.to_string(),
                        self.hidden.to_string(),
                        sp.seed.to_string(),
                        name.into(),
                        i.to_string(),
                        fmt_f64(*v),
                    ]);
                }
            }
        }
        Ok(vec![t])
    }
}
