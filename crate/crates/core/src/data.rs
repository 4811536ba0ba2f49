//! Dataset ingestion and generation.
//!
//! Two sources feed the training and certification pipelines: a strict
//! big-endian IDX image/label loader (the MNIST container format) and a
//! synthetic Gaussian-blobs generator for fast experiments and property
//! tests. Both normalize features into `[0,1]`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{tag, StreamFactory};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// An immutable labeled dataset with features in `[0,1]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidArgument("dataset must be nonempty".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: features.rows(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite feature values".into(),
            ));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn example(&self, index: usize) -> (&[f64], usize) {
        (self.features.row(index), self.labels[index])
    }

    /// Copies the given rows into a new dataset with the same class count.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.features.row(i).to_vec()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(Matrix::from_rows(&rows)?, labels, self.num_classes)
    }
}

/// Read access to labeled examples. Exists so tests can interpose tracing
/// wrappers between training code and the backing dataset.
pub trait ExampleSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn feature_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn example(&self, index: usize) -> (&[f64], usize);
}

impl ExampleSource for Dataset {
    fn len(&self) -> usize {
        Dataset::len(self)
    }
    fn feature_dim(&self) -> usize {
        Dataset::feature_dim(self)
    }
    fn num_classes(&self) -> usize {
        Dataset::num_classes(self)
    }
    fn example(&self, index: usize) -> (&[f64], usize) {
        Dataset::example(self, index)
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: end,
            actual: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Loads a big-endian IDX image/label pair into a dataset. Pixels are
/// scaled by 1/255; each image is flattened row-major.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let io_err = |path: &Path| {
        let p = path.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    let images = std::fs::read(images_path).map_err(io_err(images_path))?;
    let labels = std::fs::read(labels_path).map_err(io_err(labels_path))?;

    let magic = read_be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            actual: magic,
        });
    }
    let n = read_be_u32(&images, 4, images_path)? as usize;
    let rows = read_be_u32(&images, 8, images_path)? as usize;
    let cols = read_be_u32(&images, 12, images_path)? as usize;
    let pixel_count = n * rows * cols;
    if images.len() != 16 + pixel_count {
        return Err(Error::Truncated {
            path: images_path.to_path_buf(),
            expected: 16 + pixel_count,
            actual: images.len(),
        });
    }

    let lmagic = read_be_u32(&labels, 0, labels_path)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::IdxMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            actual: lmagic,
        });
    }
    let ln = read_be_u32(&labels, 4, labels_path)? as usize;
    if ln != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: ln,
        });
    }
    if labels.len() != 8 + n {
        return Err(Error::Truncated {
            path: labels_path.to_path_buf(),
            expected: 8 + n,
            actual: labels.len(),
        });
    }

    let features: Vec<f64> = images[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let label_values: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    let num_classes = label_values.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(
        Matrix::from_vec(n, rows * cols, features)?,
        label_values,
        num_classes.max(2),
    )
}

/// Writes a big-endian IDX image/label pair; the exact inverse of
/// [`load_idx`] on byte-valued data.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let n = labels.len();
    if pixels.len() != n * rows * cols {
        return Err(Error::Shape {
            context: "write_idx pixels",
            expected: n * rows * cols,
            actual: pixels.len(),
        });
    }
    let mut image_bytes = Vec::with_capacity(16 + pixels.len());
    image_bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    image_bytes.extend_from_slice(pixels);
    std::fs::write(images_path, image_bytes).map_err(|source| Error::Io {
        path: images_path.to_path_buf(),
        source,
    })?;

    let mut label_bytes = Vec::with_capacity(8 + n);
    label_bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    label_bytes.extend_from_slice(labels);
    std::fs::write(labels_path, label_bytes).map_err(|source| Error::Io {
        path: labels_path.to_path_buf(),
        source,
    })
}

/// Synthetic Gaussian blobs: class `c` is centered on a deterministic
/// unit-norm direction pushed toward the `[0,1]` box boundary (largest
/// coordinate lands at 0.02 / 0.98), and samples scatter around it with the
/// given spread, clamped to the box.
pub fn synth_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if dim == 0 || per_class == 0 {
        return Err(Error::Config("dim and per_class must be positive".into()));
    }
    if spread < 0.0 {
        return Err(Error::Domain {
            what: "spread",
            value: spread,
            range: "[0, inf)",
        });
    }
    let factory = StreamFactory::new(seed);
    let mut rows = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let mut rng = factory.stream(&[tag::BLOBS, class as u64]);
        let center = blob_center(dim, class, &mut rng);
        for _ in 0..per_class {
            let row: Vec<f64> = center
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    (c + spread * z).clamp(0.0, 1.0)
                })
                .collect();
            rows.push(row);
            labels.push(class);
        }
    }
    Dataset::new(Matrix::from_rows(&rows)?, labels, num_classes)
}

/// Deterministic class centers for [`synth_blobs`], exposed so evaluation
/// code can implement a nearest-center reference rule.
pub fn blob_centers(num_classes: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let factory = StreamFactory::new(seed);
    (0..num_classes)
        .map(|class| {
            let mut rng = factory.stream(&[tag::BLOBS, class as u64]);
            blob_center(dim, class, &mut rng)
        })
        .collect()
}

fn blob_center<R: Rng>(dim: usize, class: usize, rng: &mut R) -> Vec<f64> {
    let mut direction: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        direction = vec![0.0; dim];
        direction[class % dim] = 1.0;
    } else {
        for v in &mut direction {
            *v /= norm;
        }
    }
    let max_abs = direction.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let scale = 0.48 / max_abs;
    direction.iter().map(|&u| 0.5 + scale * u).collect()
}

/// Disjoint shuffled split into (⌊N·fraction⌋, rest).
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain {
            what: "train_fraction",
            value: train_fraction,
            range: "(0, 1)",
        });
    }
    let n = dataset.len();
    let take = (n as f64 * train_fraction).floor() as usize;
    if take == 0 || take == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} examples at fraction {train_fraction} leaves an empty side"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = StreamFactory::new(seed).stream(&[tag::SPLIT]);
    indices.shuffle(&mut rng);
    let train = dataset.subset(&indices[..take])?;
    let test = dataset.subset(&indices[take..])?;
    Ok((train, test))
}
