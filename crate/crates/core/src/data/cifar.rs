use std::path::Path;

use pclab_linalg::Matrix;

use super::Dataset;
use crate::{PcError, Result};

const RECORD: usize = 1 + 3072;

/// CIFAR-10 binary batches (`data_batch_*.bin`, `test_batch.bin`): one label
/// byte then 3072 channel-major pixels per record, flattened and scaled to
/// `[0, 1]`.
pub fn load_cifar10_batches(paths: &[&Path]) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|source| PcError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if bytes.len() % RECORD != 0 {
            return Err(PcError::Data(format!(
                "{}: {} bytes is not a whole number of records",
                path.display(),
                bytes.len()
            )));
        }
        for rec in bytes.chunks_exact(RECORD) {
            if rec[0] > 9 {
                return Err(PcError::Data(format!(
                    "{}: label {} outside 0..=9",
                    path.display(),
                    rec[0]
                )));
            }
            labels.push(rec[0] as usize);
            pixels.extend_from_slice(&rec[1..]);
        }
    }
    let n = labels.len();
    let inputs = Matrix::from_shape_fn((3072, n), |(p, j)| pixels[j * 3072 + p] as f64 / 255.0);
    Dataset::classification(inputs, labels, 10, "cifar10", "")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_records() {
        let dir = std::env::temp_dir().join(format!("pclab-cifar-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("b.bin");
        let mut bytes = vec![3u8];
        bytes.extend((0..3072).map(|i| (i % 256) as u8));
        bytes.push(8);
        bytes.extend(std::iter::repeat_n(255, 3072));
        std::fs::write(&p, &bytes).unwrap();
        let d = load_cifar10_batches(&[&p]).unwrap();
        assert_eq!(d.inputs.dim(), (3072, 2));
        assert_eq!(d.labels, Some(vec![3, 8]));
        assert_eq!(d.inputs[[1, 1]], 1.0);
        std::fs::write(&p, &bytes[..100]).unwrap();
        assert!(load_cifar10_batches(&[&p]).is_err());
    }
}
