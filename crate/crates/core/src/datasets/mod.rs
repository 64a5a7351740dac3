//! Training data: dense feature matrices, image samples, loaders, synthetic
//! generators and mini-batch sampling.

mod idx;
mod libsvm;
mod synth;

use std::io::Write;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

pub use idx::{read_idx_images, read_idx_labels, read_idx_pair, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm};
pub use synth::{glyph_stencil, synth_classification, synth_glyphs};

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDataset {
    features: Vec<f64>,
    labels: Vec<u32>,
    n_rows: usize,
    n_dims: usize,
}

impl DenseDataset {
    pub fn new(features: Vec<f64>, labels: Vec<u32>, n_dims: usize) -> Result<Self> {
        let n_rows = labels.len();
        if features.len() != n_rows * n_dims {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_dims,
                found: features.len(),
            });
        }
        Ok(DenseDataset { features, labels, n_rows, n_dims })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: labels.len() });
        }
        let n_dims = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * n_dims);
        for row in &rows {
            if row.len() != n_dims {
                return Err(Error::DimensionMismatch { expected: n_dims, found: row.len() });
            }
            features.extend_from_slice(row);
        }
        DenseDataset::new(features, labels, n_dims)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Writes `label,x0,x1,...` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend((0..self.n_dims).map(|j| format!("x{j}")));
        writer.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut record = vec![self.labels[i].to_string()];
            record.extend(self.row(i).iter().map(f64::to_string));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Rescales every feature column independently into [-1, 1].
///
/// A constant column maps to 0.
pub fn scale_features(data: &DenseDataset) -> DenseDataset {
    let (n, d) = (data.n_rows, data.n_dims);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for (j, &x) in data.row(i).iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let mut features = Vec::with_capacity(n * d);
    for i in 0..n {
        for (j, &x) in data.row(i).iter().enumerate() {
            let span = hi[j] - lo[j];
            features.push(if span > 0.0 { 2.0 * (x - lo[j]) / span - 1.0 } else { 0.0 });
        }
    }
    DenseDataset { features, labels: data.labels.clone(), n_rows: n, n_dims: d }
}

/// Row indices of one stochastic gradient step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub row_indices: Vec<usize>,
}

impl MiniBatch {
    pub fn new(row_indices: Vec<usize>) -> Self {
        MiniBatch { row_indices }
    }

    /// Every row of `data`, in order.
    pub fn full(data: &DenseDataset) -> Self {
        MiniBatch { row_indices: (0..data.n_rows()).collect() }
    }

    pub fn len(&self) -> usize {
        self.row_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_indices.is_empty()
    }
}

/// Draws `b` distinct rows uniformly at random.
pub fn sample_minibatch<R: Rng + ?Sized>(data: &DenseDataset, b: usize, rng: &mut R) -> Result<MiniBatch> {
    sample_from_range(0, data.n_rows, b, rng)
}

/// Draws `b` distinct indices from `start..start + len`.
pub(crate) fn sample_from_range<R: Rng + ?Sized>(
    start: usize,
    len: usize,
    b: usize,
    rng: &mut R,
) -> Result<MiniBatch> {
    if b == 0 {
        return Err(Error::invalid("mini-batch size must be at least 1"));
    }
    if b > len {
        return Err(Error::invalid(format!("mini-batch size {b} exceeds the {len} available rows")));
    }
    let row_indices = index::sample(rng, len, b).into_iter().map(|i| start + i).collect();
    Ok(MiniBatch { row_indices })
}

/// A single-channel image with pixel values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
    pub label: u8,
}

impl ImageSample {
    pub fn pixel(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }
}

/// Flattens images into a dataset with one pixel per feature.
pub fn images_to_dataset(images: &[ImageSample]) -> Result<DenseDataset> {
    let n_dims = images.first().map_or(0, |im| im.pixels.len());
    let mut features = Vec::with_capacity(images.len() * n_dims);
    let mut labels = Vec::with_capacity(images.len());
    for im in images {
        if im.pixels.len() != n_dims {
            return Err(Error::DimensionMismatch { expected: n_dims, found: im.pixels.len() });
        }
        features.extend_from_slice(&im.pixels);
        labels.push(u32::from(im.label));
    }
    DenseDataset::new(features, labels, n_dims)
}
