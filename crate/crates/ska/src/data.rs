//! Input ingestion: IDX image/label files and a seeded synthetic generator.
//!
//! The IDX container is parsed bit-exactly: 4-byte big-endian magic
//! (`0x00000803` for 3-dimensional image files, `0x00000801` for label
//! files), big-endian u32 dimension sizes, then an unsigned-byte payload.
//! Pixels are scaled by 1/255 into [0, 1] and images are flattened
//! row-major.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::tensor::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic 0x{found:08x} at byte 0 (expected 0x{expected:08x})")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated at byte {offset}: expected {expected} bytes, found {available}")]
    Truncated {
        path: PathBuf,
        offset: usize,
        expected: usize,
        available: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Features in [0, 1], one label per row, and the number of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    /// Seeded shuffle-and-split into (train, test); `train_fraction` of the
    /// samples land in the first part, rounded down.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(DataError::InvalidArgument(format!(
                "train_fraction must lie in [0, 1], got {train_fraction}"
            )));
        }
        let mut indices: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let cut = (self.len() as f64 * train_fraction).floor() as usize;
        Ok((
            self.subset(&indices[..cut]),
            self.subset(&indices[cut..]),
        ))
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let cols = self.dims();
        let mut data = Vec::with_capacity(indices.len() * cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.features.data()[i * cols..(i + 1) * cols]);
            labels.push(self.labels[i]);
        }
        Dataset {
            features: Matrix::from_raw(indices.len(), cols, data),
            labels,
            n_classes: self.n_classes,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(buf: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    if buf.len() < offset + 4 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            offset,
            expected: 4,
            available: buf.len().saturating_sub(offset),
        });
    }
    Ok(u32::from_be_bytes(buf[offset..offset + 4].try_into().expect("4 bytes")))
}

/// Loads an IDX image file and its matching label file.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Dataset, DataError> {
    let img = read_file(image_path)?;
    let magic = be_u32(&img, 0, image_path)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            path: image_path.to_path_buf(),
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let count = be_u32(&img, 4, image_path)? as usize;
    let rows = be_u32(&img, 8, image_path)? as usize;
    let cols = be_u32(&img, 12, image_path)? as usize;
    let payload = &img[16..];
    let expected = count * rows * cols;
    if payload.len() < expected {
        return Err(DataError::Truncated {
            path: image_path.to_path_buf(),
            offset: 16,
            expected,
            available: payload.len(),
        });
    }

    let lbl = read_file(label_path)?;
    let magic = be_u32(&lbl, 0, label_path)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: label_path.to_path_buf(),
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let label_count = be_u32(&lbl, 4, label_path)? as usize;
    let label_payload = &lbl[8..];
    if label_payload.len() < label_count {
        return Err(DataError::Truncated {
            path: label_path.to_path_buf(),
            offset: 8,
            expected: label_count,
            available: label_payload.len(),
        });
    }
    if count != label_count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let data: Vec<f64> = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = label_payload[..label_count].iter().map(|&b| b as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Ok(Dataset {
        features: Matrix::from_raw(count, rows * cols, data),
        labels,
        n_classes,
    })
}

/// Writes an IDX image file: magic, count, rows, cols, then raw pixels.
pub fn write_idx_images(
    path: &Path,
    count: usize,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<(), DataError> {
    if pixels.len() != count * rows * cols {
        return Err(DataError::InvalidArgument(format!(
            "{} pixels do not fill {count} images of {rows}x{cols}",
            pixels.len()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(count as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes an IDX label file: magic, count, then raw labels.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), DataError> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Seeded multi-class Gaussian blobs, min-max scaled into [0, 1].
///
/// Each class mean sits on its own seeded unit direction; samples add
/// Gaussian noise of the given spread. Labels come out in class-block order,
/// `per_class` of each.
pub fn synthetic_blobs(
    n_classes: usize,
    per_class: usize,
    dims: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n_classes == 0 || per_class == 0 || dims == 0 {
        return Err(DataError::InvalidArgument(
            "n_classes, per_class, and dims must all be at least 1".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "spread must be positive and finite, got {spread}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("finite std");
    let noise = Normal::new(0.0, spread).expect("finite std");

    let mut means = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut dir: Vec<f64> = (0..dims).map(|_| unit.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-9 {
            dir = (0..dims).map(|j| f64::from(j == class % dims)).collect();
        } else {
            dir.iter_mut().for_each(|v| *v /= norm);
        }
        means.push(dir);
    }

    let total = n_classes * per_class;
    let mut data = Vec::with_capacity(total * dims);
    let mut labels = Vec::with_capacity(total);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                data.push(m + noise.sample(&mut rng));
            }
            labels.push(class);
        }
    }

    // Global min-max scaling keeps the class geometry intact.
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range > 0.0 {
        data.iter_mut().for_each(|v| *v = (*v - min) / range);
    } else {
        data.iter_mut().for_each(|v| *v = 0.5);
    }

    Ok(Dataset {
        features: Matrix::from_raw(total, dims, data),
        labels,
        n_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_paths(dir: &tempfile::TempDir) -> (PathBuf, PathBuf) {
        (dir.path().join("images.idx3"), dir.path().join("labels.idx1"))
    }

    #[test]
    fn hand_built_fixture_loads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        let pixels = [0u8, 51, 102, 153, 204, 255, 10, 20];
        write_idx_images(&img, 2, 2, 2, &pixels).unwrap();
        write_idx_labels(&lbl, &[3, 7]).unwrap();

        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.features.shape(), (2, 4));
        for (value, byte) in ds.features.data().iter().zip(&pixels) {
            assert_eq!(*value, *byte as f64 / 255.0);
        }
        // Byte 255 scales to exactly 1.0.
        assert_eq!(ds.features.get(1, 1), 1.0);
        assert_eq!(ds.labels, vec![3, 7]);
        assert_eq!(ds.n_classes, 8);
    }

    #[test]
    fn bad_magic_is_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0xdead_beefu32.to_be_bytes());
        bytes.extend_from_slice(&[0u8; 12]);
        fs::write(&img, bytes).unwrap();
        write_idx_labels(&lbl, &[0]).unwrap();

        let err = load_idx(&img, &lbl).unwrap_err();
        match &err {
            DataError::BadMagic { found, expected, .. } => {
                assert_eq!(*found, 0xdead_beef);
                assert_eq!(*expected, IMAGE_MAGIC);
            }
            other => panic!("expected BadMagic, got {other:?}"),
        }
        assert!(err.to_string().contains("byte 0"));
    }

    #[test]
    fn truncated_payload_is_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx_images(&img, 2, 2, 2, &[7u8; 8]).unwrap();
        write_idx_labels(&lbl, &[0, 1]).unwrap();
        // Chop two payload bytes off the end.
        let mut bytes = fs::read(&img).unwrap();
        bytes.truncate(bytes.len() - 2);
        fs::write(&img, bytes).unwrap();

        let err = load_idx(&img, &lbl).unwrap_err();
        match err {
            DataError::Truncated { offset, expected, available, .. } => {
                assert_eq!(offset, 16);
                assert_eq!(expected, 8);
                assert_eq!(available, 6);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn truncated_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        fs::write(&img, IMAGE_MAGIC.to_be_bytes()).unwrap();
        write_idx_labels(&lbl, &[0]).unwrap();
        assert!(matches!(
            load_idx(&img, &lbl),
            Err(DataError::Truncated { offset: 4, .. })
        ));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx_images(&img, 2, 2, 2, &[1u8; 8]).unwrap();
        write_idx_labels(&lbl, &[0, 1, 2]).unwrap();
        assert!(matches!(
            load_idx(&img, &lbl),
            Err(DataError::CountMismatch { images: 2, labels: 3 })
        ));
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx_labels(&lbl, &[0]).unwrap();
        let err = load_idx(&img, &lbl).unwrap_err();
        assert!(err.to_string().contains("images.idx3"), "{err}");
    }

    #[test]
    fn idx_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        let pixels: Vec<u8> = (0..=255).collect();
        let labels: Vec<u8> = (0..16).map(|i| i % 4).collect();
        write_idx_images(&img, 16, 4, 4, &pixels).unwrap();
        write_idx_labels(&lbl, &labels).unwrap();

        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.features.shape(), (16, 16));
        for (i, &byte) in pixels.iter().enumerate() {
            assert_eq!(ds.features.data()[i], byte as f64 / 255.0);
        }
        assert_eq!(ds.labels, labels.iter().map(|&l| l as usize).collect::<Vec<_>>());
        assert!(ds.features.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn blobs_are_deterministic_per_seed() {
        let a = synthetic_blobs(3, 5, 4, 0.2, 99).unwrap();
        let b = synthetic_blobs(3, 5, 4, 0.2, 99).unwrap();
        assert_eq!(a, b);
        let c = synthetic_blobs(3, 5, 4, 0.2, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_spread_collapses_classes() {
        let ds = synthetic_blobs(3, 4, 5, 1e-12, 7).unwrap();
        for class in 0..3 {
            let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
            let first = rows[0];
            for &row in &rows[1..] {
                for c in 0..5 {
                    let diff = (ds.features.get(row, c) - ds.features.get(first, c)).abs();
                    assert!(diff < 1e-9, "class {class} spread {diff}");
                }
            }
        }
    }

    #[test]
    fn blob_bookkeeping_and_range() {
        let ds = synthetic_blobs(10, 10, 6, 0.3, 1).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.n_classes, 10);
        let mut histogram = [0usize; 10];
        for &l in &ds.labels {
            histogram[l] += 1;
        }
        assert!(histogram.iter().all(|&c| c == 10));
        assert!(ds.features.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn split_partitions_consistently() {
        let ds = synthetic_blobs(4, 10, 3, 0.2, 5).unwrap();
        let (train, test) = ds.split(0.75, 11).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(test.len(), 10);
        assert_eq!(train.n_classes, 4);

        let (train_b, test_b) = ds.split(0.75, 11).unwrap();
        assert_eq!(train, train_b);
        assert_eq!(test, test_b);

        assert!(ds.split(1.5, 0).is_err());
    }
}
