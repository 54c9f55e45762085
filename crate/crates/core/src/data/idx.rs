use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use pclab_linalg::Matrix;

use super::Dataset;
use crate::{PcError, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PcError + '_ {
    move |source| PcError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Whole file, gunzipped when it starts with the gzip magic.
fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(io_err(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| PcError::Data(format!("{}: truncated header", path.display())))
}

/// Returns `(pixels, n, rows, cols)` with pixels sample-major.
pub fn read_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(PcError::Data(format!(
            "{}: bad image magic {magic:#010x}",
            path.display()
        )));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let need = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(PcError::Data(format!(
            "{}: truncated payload, {} of {need} bytes",
            path.display(),
            payload.len()
        )));
    }
    Ok((payload[..need].to_vec(), n, rows, cols))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(PcError::Data(format!(
            "{}: bad label magic {magic:#010x}",
            path.display()
        )));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(PcError::Data(format!(
            "{}: truncated payload, {} of {n} labels",
            path.display(),
            payload.len()
        )));
    }
    Ok(payload[..n].to_vec())
}

pub fn write_idx_images(path: &Path, pixels: &[u8], n: usize, rows: usize, cols: usize) -> Result<()> {
    assert_eq!(pixels.len(), n * rows * cols, "pixel count");
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

/// Images scaled to `[0, 1]`, ten one-hot classes.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (pixels, n, rows, cols) = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != n {
        return Err(PcError::Data(format!("{n} images but {} labels", lab.len())));
    }
    if let Some(bad) = lab.iter().find(|&&l| l > 9) {
        return Err(PcError::Data(format!("label {bad} outside 0..=9")));
    }
    let d = rows * cols;
    let inputs = Matrix::from_shape_fn((d, n), |(p, j)| pixels[j * d + p] as f64 / 255.0);
    let labels: Vec<usize> = lab.iter().map(|&l| l as usize).collect();
    let name = images
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::classification(inputs, labels, 10, &name, "")
}

/// Locates the image and label files of `split` ("train" or "test") in an
/// MNIST-style directory. Both `t10k-images-idx3-ubyte` and
/// `t10k-images.idx3-ubyte` spellings are accepted, optionally gzipped.
pub fn mnist_files(root: &Path, split: &str) -> Result<(PathBuf, PathBuf)> {
    let prefix = match split {
        "train" => "train",
        "test" | "t10k" => "t10k",
        _ => return Err(PcError::Data(format!("unknown split '{split}'"))),
    };
    let find = |kind: &str, code: &str| -> Result<PathBuf> {
        let names = [
            format!("{prefix}-{kind}-{code}-ubyte"),
            format!("{prefix}-{kind}.{code}-ubyte"),
        ];
        for name in &names {
            for ext in ["", ".gz"] {
                let p = root.join(format!("{name}{ext}"));
                if p.is_file() {
                    return Ok(p);
                }
            }
        }
        Err(PcError::Data(format!("{} not found in {}", names[0], root.display())))
    };
    Ok((find("images", "idx3")?, find("labels", "idx1")?))
}

pub fn load_idx_pair(root: &Path, split: &str) -> Result<Dataset> {
    let (img, lab) = mnist_files(root, split)?;
    let mut d = load_idx(&img, &lab)?;
    d.split = split.into();
    Ok(d)
}
