//! Dataset loading (MNIST IDX, CIFAR-10 binary), preprocessing and online
//! sample ordering.
//!
//! Expected on-disk layout under a data directory:
//!
//! ```text
//! <data-dir>/mnist/train-images-idx3-ubyte
//! <data-dir>/mnist/train-labels-idx1-ubyte
//! <data-dir>/mnist/t10k-images-idx3-ubyte
//! <data-dir>/mnist/t10k-labels-idx1-ubyte
//! <data-dir>/cifar-10-batches-bin/data_batch_{1..5}.bin
//! <data-dir>/cifar-10-batches-bin/test_batch.bin
//! ```
//!
//! The files may also sit directly in `<data-dir>`.

pub mod cifar;
pub mod idx;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{self, Rng};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageDims {
    pub const MNIST: ImageDims = ImageDims::new(28, 28, 1);
    pub const CIFAR10: ImageDims = ImageDims::new(32, 32, 3);

    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        ImageDims {
            height,
            width,
            channels,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Flat input index of pixel `(row, col)` in channel `ch`.
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            other => Err(Error::config("dataset", format!("unknown dataset `{other}`"))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
        })
    }
}

impl DatasetKind {
    pub fn dims(&self) -> ImageDims {
        match self {
            DatasetKind::Mnist => ImageDims::MNIST,
            DatasetKind::Cifar10 => ImageDims::CIFAR10,
        }
    }

    fn subdir(&self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar-10-batches-bin",
        }
    }

    fn files(&self, split: Split) -> Vec<&'static str> {
        match (self, split) {
            (DatasetKind::Mnist, Split::Train) => {
                vec!["train-images-idx3-ubyte", "train-labels-idx1-ubyte"]
            }
            (DatasetKind::Mnist, Split::Test) => {
                vec!["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
            }
            (DatasetKind::Cifar10, Split::Train) => vec![
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            (DatasetKind::Cifar10, Split::Test) => vec!["test_batch.bin"],
        }
    }

    /// Directory holding this dataset's files, if present under `data_dir`.
    pub fn locate(&self, data_dir: &Path) -> Option<PathBuf> {
        let first = self.files(Split::Train)[0];
        [data_dir.join(self.subdir()), data_dir.to_path_buf()]
            .into_iter()
            .find(|d| d.join(first).is_file())
    }

    pub fn load(&self, data_dir: &Path, split: Split) -> Result<RawDataset> {
        let dir = self.locate(data_dir).ok_or_else(|| Error::Io {
            path: data_dir.join(self.subdir()),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{self} files not found"),
            ),
        })?;
        let files: Vec<PathBuf> = self.files(split).iter().map(|f| dir.join(f)).collect();
        match self {
            DatasetKind::Mnist => idx::load_idx(&files[0], &files[1], split),
            DatasetKind::Cifar10 => cifar::load_batches(&files, split),
        }
    }
}

/// Unprocessed images as stored on disk, `N × H × W × C` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub dims: ImageDims,
    pub split: Split,
}

impl RawDataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, dims: ImageDims, split: Split) -> Result<Self> {
        let d = dims.input_dim();
        if images.len() != labels.len() * d {
            return Err(Error::Dimension {
                what: "image bytes",
                expected: labels.len() * d,
                actual: images.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::argument("labels", format!("label {bad} outside 0..=9")));
        }
        Ok(RawDataset {
            images,
            labels,
            dims,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let d = self.dims.input_dim();
        &self.images[i * d..(i + 1) * d]
    }

    /// Pixels of image `i` rescaled to [0, 1].
    pub fn scaled(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    /// First `n` records (all of them if `n` exceeds the length).
    pub fn truncate(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.labels.truncate(n);
        self.images.truncate(n * self.dims.input_dim());
        self
    }
}

/// Preprocessed samples: pixels scaled to [0, 1] and mean-centered.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vectors: Array2<f64>,
    pub labels: Vec<u8>,
    pub pixel_mean: Array1<f64>,
    pub onehot: Array2<f64>,
    pub dims: ImageDims,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn target(&self, i: usize) -> ArrayView1<'_, f64> {
        self.onehot.row(i)
    }

    /// Undoes the centering and scaling of sample `i`.
    pub fn raw_pixels(&self, i: usize) -> Array1<f64> {
        (&self.vectors.row(i) + &self.pixel_mean) * 255.0
    }

    /// Samples at `indices`, keeping the centering of `self`.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            vectors: self.vectors.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            pixel_mean: self.pixel_mean.clone(),
            onehot: self.onehot.select(Axis(0), indices),
            dims: self.dims,
            split: self.split,
        }
    }

    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

pub fn onehot(labels: &[u8]) -> Array2<f64> {
    let mut t = Array2::zeros((labels.len(), NUM_CLASSES));
    for (i, &l) in labels.iter().enumerate() {
        t[[i, l as usize]] = 1.0;
    }
    t
}

/// Scales pixels to [0, 1] and subtracts the pixel-wise mean.
///
/// The mean is computed from `raw` when `train_mean` is `None`, which is only
/// allowed for the training split. Test data is centered with the training
/// mean.
pub fn preprocess(raw: &RawDataset, train_mean: Option<&Array1<f64>>) -> Result<Dataset> {
    let d = raw.dims.input_dim();
    let n = raw.len();
    let mut vectors = Array2::from_shape_fn((n, d), |(i, j)| f64::from(raw.images[i * d + j]) / 255.0);
    let mean = match train_mean {
        Some(m) => {
            if m.len() != d {
                return Err(Error::Dimension {
                    what: "pixel mean",
                    expected: d,
                    actual: m.len(),
                });
            }
            m.clone()
        }
        None => {
            if raw.split == Split::Test {
                return Err(Error::argument(
                    "train_mean",
                    "the test split must be centered with the training mean",
                ));
            }
            vectors.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d))
        }
    };
    vectors -= &mean.view().insert_axis(Axis(0));
    Ok(Dataset {
        onehot: onehot(&raw.labels),
        vectors,
        labels: raw.labels.clone(),
        pixel_mean: mean,
        dims: raw.dims,
        split: raw.split,
    })
}

/// Loads and preprocesses both splits, centering the test split with the
/// training mean.
pub fn load_pair(kind: DatasetKind, data_dir: &Path) -> Result<(Dataset, Dataset)> {
    let train_raw = kind.load(data_dir, Split::Train)?;
    let test_raw = kind.load(data_dir, Split::Test)?;
    preprocess_pair(&train_raw, &test_raw)
}

pub fn preprocess_pair(train: &RawDataset, test: &RawDataset) -> Result<(Dataset, Dataset)> {
    let train = preprocess(train, None)?;
    let test = preprocess(test, Some(&train.pixel_mean))?;
    Ok((train, test))
}

/// Smallest number of principal components whose eigenvalues capture at
/// least `variance_fraction` of the total variance. All-zero data has
/// dimension 0.
pub fn effective_dimension(data: &Dataset, variance_fraction: f64) -> Result<usize> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::argument(
            "variance_fraction",
            format!("{variance_fraction} not in (0, 1]"),
        ));
    }
    if data.len() < 2 {
        return Err(Error::argument("data", "need at least 2 samples"));
    }
    let cov = linalg::covariance(data.vectors.view());
    let (eigenvalues, _) = linalg::symmetric_eigen(cov.view());
    Ok(components_for_fraction(eigenvalues.as_slice().unwrap(), variance_fraction))
}

/// Number of leading (descending) eigenvalues needed to reach `fraction` of
/// their total. Negative round-off eigenvalues count as zero.
pub fn components_for_fraction(eigenvalues: &[f64], fraction: f64) -> usize {
    let total: f64 = eigenvalues.iter().map(|&v| v.max(0.0)).sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (k, &v) in eigenvalues.iter().enumerate() {
        acc += v.max(0.0);
        // Relative slack absorbs summation round-off at fraction = 1.
        if acc >= fraction * total * (1.0 - 1e-12) {
            return k + 1;
        }
    }
    eigenvalues.len()
}

/// Area-weight matrix for resampling `from` pixels onto `to` pixels along
/// one axis: entry `[o][i]` is the fraction of output pixel `o` covered by
/// input pixel `i`.
fn area_weights(from: usize, to: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = from as f64 / to as f64;
    (0..to)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(from);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Resizes every image to `side × side` by block-area averaging.
pub fn downsample(raw: &RawDataset, side: usize) -> Result<RawDataset> {
    if side == 0 {
        return Err(Error::argument("side", "must be positive"));
    }
    let ImageDims {
        height,
        width,
        channels,
    } = raw.dims;
    let out_dims = ImageDims::new(side, side, channels);
    let rows = area_weights(height, side);
    let cols = area_weights(width, side);
    let mut out = Vec::with_capacity(raw.len() * out_dims.input_dim());
    for n in 0..raw.len() {
        let img = raw.image(n);
        for wr in &rows {
            for wc in &cols {
                for ch in 0..channels {
                    let mut acc = 0.0;
                    for &(r, a) in wr {
                        for &(c, b) in wc {
                            acc += a * b * f64::from(img[raw.dims.index(r, c, ch)]);
                        }
                    }
                    out.push(acc.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    RawDataset::new(out, raw.labels.clone(), out_dims, raw.split)
}

/// Uniform sampling without replacement, reshuffled every epoch.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
    rng: Rng,
}

impl EpochSampler {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut rng = linalg::seeded_rng(seed, 0x5a3f1e);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        EpochSampler {
            order,
            pos: 0,
            epoch: 0,
            rng,
        }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

impl Iterator for EpochSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.order.is_empty() {
            return None;
        }
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
            self.epoch += 1;
        }
        let i = self.order[self.pos];
        self.pos += 1;
        Some(i)
    }
}
