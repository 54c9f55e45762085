//! Datasets: IDX (MNIST, Fashion-MNIST), CIFAR-10 binary batches, synthetic
//! sets and seeded batching.

mod batch;
mod cifar;
mod idx;
mod synthetic;

pub use batch::{Batch, BatchIter, BatchPlan};
pub use cifar::load_cifar10_batches;
pub use idx::{
    load_idx, load_idx_pair, mnist_files, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels,
};
pub use synthetic::{separable_two_class, teacher_regression, toy_regression};

use ndarray::Axis;
use pclab_linalg::Matrix;

use crate::{PcError, Result};

/// Samples as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    /// Class indices when the targets are one-hot.
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub split: String,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix, name: &str, split: &str) -> Result<Self> {
        if inputs.ncols() != targets.ncols() {
            return Err(PcError::Data(format!(
                "{} inputs but {} targets",
                inputs.ncols(),
                targets.ncols()
            )));
        }
        Ok(Dataset {
            inputs,
            targets,
            labels: None,
            name: name.into(),
            split: split.into(),
        })
    }

    /// Classification set from inputs and class indices.
    pub fn classification(inputs: Matrix, labels: Vec<usize>, classes: usize, name: &str, split: &str) -> Result<Self> {
        let targets = one_hot(&labels, classes)?;
        let mut d = Dataset::new(inputs, targets, name, split)?;
        d.labels = Some(labels);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_in(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.targets.nrows()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(1), indices),
            targets: self.targets.select(Axis(1), indices),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            name: self.name.clone(),
            split: self.split.clone(),
        }
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut t = Matrix::zeros((classes, labels.len()));
    for (j, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(PcError::Data(format!("label {c} outside 0..{classes}")));
        }
        t[[c, j]] = 1.0;
    }
    Ok(t)
}

/// Row index of the largest entry of each column.
pub fn argmax_columns(m: &Matrix) -> Vec<usize> {
    m.columns()
        .into_iter()
        .map(|c| {
            let mut best = 0;
            for i in 1..c.len() {
                if c[i] > c[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
