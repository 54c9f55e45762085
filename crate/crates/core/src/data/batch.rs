use pclab_linalg::{Matrix, RngStream};

use super::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub shuffle: bool,
    pub seed: u64,
}

impl BatchPlan {
    pub fn new(batch_size: usize, shuffle: bool, seed: u64) -> Self {
        assert!(batch_size >= 1, "batch size must be positive");
        BatchPlan {
            batch_size,
            shuffle,
            seed,
        }
    }

    /// Sample order for `epoch`; each epoch draws from its own child stream.
    pub fn order(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        if self.shuffle {
            RngStream::new(self.seed).split(epoch as u64).shuffle(&mut idx);
        }
        idx
    }

    pub fn batches<'a>(&self, data: &'a Dataset, epoch: usize) -> BatchIter<'a> {
        BatchIter {
            data,
            order: self.order(data.len(), epoch),
            pos: 0,
            batch_size: self.batch_size,
        }
    }

    pub fn batch_count(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Matrix,
    pub y: Matrix,
    pub indices: Vec<usize>,
}

pub struct BatchIter<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let part = self.data.select(&indices);
        Some(Batch {
            x: part.inputs,
            y: part.targets,
            indices,
        })
    }
}
