//! `ep-spectrum`: spectra of the equilibrium-propagation activity Hessian.

use pclab_core::hessian::{assemble_hessian_ep, spectrum_summary};
use pclab_core::{Network, NetworkSpec, Parameterisation};
use serde::{Deserialize, Serialize};

use super::{par_map, replicate_seed};
use crate::config::{sorted, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};

pub const FILE: &str = "ep_spectrum.csv";
pub const HEADER: &[&str] = &["case", "N", "H", "w2", "seed", "beta", "l2", "index", "eigenvalue"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpConfig {
    /// Scalar two-layer nets `x -> w1 -> w2`, one per value of `w2`.
    pub scalar_w1: f64,
    pub scalar_w2: Vec<f64>,
    /// Random linear SP nets with `d_in = d_out = N`.
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub betas: Vec<f64>,
    /// Identity from the squared-activity term on every layer.
    pub l2: bool,
    pub zero_weights: bool,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            scalar_w1: 1.0,
            scalar_w2: vec![0.5, 2.0],
            widths: Vec::new(),
            depths: Vec::new(),
            seeds: 1,
            seed: 0,
            betas: vec![0.0],
            l2: true,
            zero_weights: false,
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "counterexample",
        r#"scalar_w1 = 1.0
scalar_w2 = [2.0]
betas = [0.0]
l2 = true
"#,
    ),
    (
        "random-nets",
        r#"scalar_w2 = []
widths = [8, 32]
depths = [2, 4, 8]
seeds = 3
betas = [0.0, 0.1, 1.0]
l2 = true
"#,
    ),
];

enum Case {
    Scalar(f64),
    Random { n: usize, h: usize, seed: u64 },
}

impl EpConfig {
    fn network(&self, c: &Case) -> pclab_core::Result<Network> {
        let net = match *c {
            Case::Scalar(w2) => Network::scalar(Parameterisation::Sp, &[self.scalar_w1, w2], false)?,
            Case::Random { n, h, seed } => {
                Network::init(NetworkSpec::new(n, n, h, n, Parameterisation::Sp).with_seed(seed))?
            }
        };
        Ok(if self.zero_weights { net.zeroed() } else { net })
    }
}

impl Experiment for EpConfig {
    const NAME: &'static str = "ep-spectrum";

    fn presets() -> &'static [(&'static str, &'static str)] {
        PRESETS
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> CliResult<()> {
        if self.scalar_w2.is_empty() && (self.widths.is_empty() || self.depths.is_empty()) {
            return Err(CliError::Config(
                "need scalar_w2 values or a widths x depths grid".into(),
            ));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(CliError::Config("betas must be a non-empty list of values >= 0".into()));
        }
        if self.widths.contains(&0) || self.depths.contains(&0) {
            return Err(CliError::Config("widths and depths must be >= 1".into()));
        }
        Ok(())
    }

    fn run(&self) -> CliResult<Vec<Table>> {
        let mut cases = Vec::new();
        for &w2 in &sorted(&self.scalar_w2) {
            cases.push(Case::Scalar(w2));
        }
        for &n in &sorted(&self.widths) {
            for &h in &sorted(&self.depths) {
                for r in 0..self.seeds {
                    cases.push(Case::Random {
                        n,
                        h,
                        seed: replicate_seed(self.seed, r),
                    });
                }
            }
        }
        let betas = sorted(&self.betas);
        let spectra = par_map(&cases, |c| -> pclab_core::Result<Vec<Vec<f64>>> {
            let net = self.network(c)?;
            betas
                .iter()
                .map(|&b| {
                    Ok(spectrum_summary(&assemble_hessian_ep(&net, b, self.l2)?, true)?
                        .eigenvalues
                        .expect("kept"))
                })
                .collect()
        });
        let mut t = Table::new(FILE, HEADER);
        for (c, per_beta) in cases.iter().zip(spectra) {
            let (case, n, h, w2, seed) = match *c {
                Case::Scalar(w2) => ("scalar", 1, 1, fmt_f64(w2), String::new()),
                Case::Random { n, h, seed } => ("random", n, h, String::new(), seed.to_string()),
            };
            for (&beta, eig) in betas.iter().zip(per_beta?) {
                for (i, v) in eig.iter().enumerate() {
                    t.push(vec![
                        case.into(),
                        n.to_string(),
                        h.to_string(),
                        w2.clone(),
                        seed.clone(),
                        fmt_f64(beta),
                        self.l2.to_string(),
                        i.to_string(),
                        fmt_f64(*v),
                    ]);
                }
            }
        }
        Ok(vec![t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_has_a_negative_eigenvalue() {
        let cfg = EpConfig {
            scalar_w2: vec![2.0],
            ..Default::default()
        };
        let t = &cfg.run().unwrap()[0];
        let eig: Vec<f64> = t.rows.iter().map(|r| t.get_f64(r, "eigenvalue").unwrap()).collect();
        assert_eq!(eig.len(), 2);
        assert!((eig[0] + 1.0).abs() < 1e-10 && (eig[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn zero_weights_give_the_identity() {
        let cfg = EpConfig {
            scalar_w2: vec![],
            widths: vec![3],
            depths: vec![2],
            zero_weights: true,
            ..Default::default()
        };
        let t = &cfg.run().unwrap()[0];
        assert_eq!(t.rows.len(), 9);
        assert!(t.rows.iter().all(|r| t.get_f64(r, "eigenvalue") == Some(1.0)));
    }

    #[test]
    fn nudge_shifts_the_trace_by_beta_times_output_width() {
        let cfg = EpConfig {
            scalar_w2: vec![],
            widths: vec![4],
            depths: vec![2],
            betas: vec![0.0, 0.5],
            ..Default::default()
        };
        let t = &cfg.run().unwrap()[0];
        let tr = |b: f64| -> f64 {
            t.rows
                .iter()
                .filter(|r| t.get(r, "beta") == fmt_f64(b))
                .map(|r| t.get_f64(r, "eigenvalue").unwrap())
                .sum()
        };
        assert!((tr(0.5) - tr(0.0) - 0.5 * 4.0).abs() < 1e-6);
    }
}
