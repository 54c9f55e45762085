//! The `[data]` section shared by the training subcommands.

use std::path::{Path, PathBuf};

use pclab_core::data::{
    load_cifar10_batches, load_idx_pair, separable_two_class, teacher_regression, toy_regression, Dataset,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DATA_ROOT_ENV: &str = "PCLAB_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
    /// Random linear teacher; see `d_in`, `d_out`, `noise`.
    Teacher,
    Separable,
    /// Scalar `y = -x + eps`.
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub name: DatasetName,
    /// Directory holding `mnist/`, `fashion_mnist/`, `cifar10/` (or the files
    /// themselves). Falls back to `$PCLAB_DATA_ROOT`, then `./data`.
    pub root: Option<PathBuf>,
    /// Keep only the first `n` training samples.
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    /// Sizes for the synthetic sets.
    pub n_train: usize,
    pub n_test: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub noise: f64,
    /// Seed of the synthetic generators.
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            name: DatasetName::Mnist,
            root: None,
            train_subset: None,
            test_subset: None,
            n_train: 2048,
            n_test: 512,
            d_in: 32,
            d_out: 10,
            noise: 0.0,
            seed: 0,
        }
    }
}

pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}

fn subdir(root: &Path, name: &str) -> PathBuf {
    let p = root.join(name);
    if p.is_dir() {
        p
    } else {
        root.to_path_buf()
    }
}

impl DataConfig {
    pub fn root(&self) -> PathBuf {
        self.root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.train_subset == Some(0) || self.test_subset == Some(0) {
            return Err(CliError::Config("data subsets must hold at least one sample".into()));
        }
        if self.n_train == 0 || self.n_test == 0 || self.d_in == 0 || self.d_out == 0 {
            return Err(CliError::Config("synthetic data sizes must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(CliError::Config("'noise' must be >= 0".into()));
        }
        Ok(())
    }

    pub fn load(&self) -> CliResult<Splits> {
        let missing = |e: pclab_core::PcError| {
            CliError::Config(format!(
                "{e}; point --data-root or ${DATA_ROOT_ENV} at a directory containing the dataset"
            ))
        };
        let (train, test) = match self.name {
            DatasetName::Mnist | DatasetName::FashionMnist => {
                let sub = if self.name == DatasetName::Mnist {
                    "mnist"
                } else {
                    "fashion_mnist"
                };
                let dir = subdir(&self.root(), sub);
                (
                    load_idx_pair(&dir, "train").map_err(missing)?,
                    load_idx_pair(&dir, "test").map_err(missing)?,
                )
            }
            DatasetName::Cifar10 => {
                let dir = subdir(&self.root(), "cifar10");
                let names: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
                let refs: Vec<&Path> = names.iter().map(PathBuf::as_path).collect();
                let test = dir.join("test_batch.bin");
                (
                    load_cifar10_batches(&refs).map_err(missing)?,
                    load_cifar10_batches(&[&test]).map_err(missing)?,
                )
            }
            DatasetName::Teacher | DatasetName::Separable | DatasetName::Toy => {
                let n = self.n_train + self.n_test;
                let all = match self.name {
                    DatasetName::Teacher => teacher_regression(self.d_in, self.d_out, n, self.noise, self.seed),
                    DatasetName::Separable => separable_two_class(n, self.d_in, self.seed),
                    _ => toy_regression(n, self.seed),
                };
                let idx: Vec<usize> = (0..n).collect();
                let mut test = all.select(&idx[self.n_train..]);
                test.split = "test".into();
                (all.select(&idx[..self.n_train]), test)
            }
        };
        let cut = |d: Dataset, k: Option<usize>| match k {
            Some(k) if k < d.len() => d.head(k),
            _ => d,
        };
        Ok(Splits {
            train: cut(train, self.train_subset),
            test: cut(test, self.test_subset),
        })
    }
}
