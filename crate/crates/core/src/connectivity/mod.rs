//! Fixed hidden-layer weights: dense or patch-localized, Gaussian or Gabor.

pub mod gabor;
pub mod receptive;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

pub use gabor::{gabor_value, random_search_intervals, GaborIntervals, GaborParams, Interval};
pub use receptive::ReceptiveFieldMap;

use crate::datasets::ImageDims;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{relu, seeded_rng, Rng};

/// Grid-searched variance constant for localized Gaussian weights.
pub const DEFAULT_VARIANCE_CONSTANT: f64 = 3.0;
pub const BIAS_HIGH: f64 = 0.1;

const STREAM_WEIGHTS: u64 = 1;
const STREAM_PATCHES: u64 = 2;
const STREAM_BIAS: u64 = 3;

/// Input-to-hidden weights with ReLU units.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenWeights {
    /// `n_h × d`; zero outside each unit's patch when `rf` is present.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub rf: Option<ReceptiveFieldMap>,
}

impl HiddenWeights {
    pub fn n_hidden(&self) -> usize {
        self.w.nrows()
    }

    /// Pre-activation `W x + b`, touching only patch inputs when localized.
    pub fn preactivation_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        match &self.rf {
            Some(rf) => {
                for (i, list) in rf.index_lists.iter().enumerate() {
                    let row = self.w.row(i);
                    let mut acc = self.b[i];
                    for &j in list {
                        acc += row[j] * x[j];
                    }
                    out[i] = acc;
                }
            }
            None => {
                out.assign(&self.w.dot(&x));
                out += &self.b;
            }
        }
    }
}

impl Encoder for HiddenWeights {
    fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    fn encode_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        self.preactivation_into(x, out.view_mut());
        out.mapv_inplace(relu);
    }
}

fn uniform_bias(n_h: usize, rng: &mut Rng) -> Array1<f64> {
    Array1::from_shape_fn(n_h, |_| rng.random_range(0.0..BIAS_HIGH))
}

fn check_hidden(n_h: usize) -> Result<()> {
    if n_h == 0 {
        return Err(Error::argument("n_h", "need at least one hidden unit"));
    }
    Ok(())
}

/// Dense Gaussian weights with variance `1 / (100 d)`.
pub fn init_random_full(n_h: usize, d: usize, seed: u64) -> Result<HiddenWeights> {
    check_hidden(n_h)?;
    if d == 0 {
        return Err(Error::argument("d", "input dimension must be positive"));
    }
    let std = (1.0 / (100.0 * d as f64)).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let mut rng = seeded_rng(seed, STREAM_WEIGHTS);
    let w = Array2::from_shape_fn((n_h, d), |_| normal.sample(&mut rng));
    let b = uniform_bias(n_h, &mut seeded_rng(seed, STREAM_BIAS));
    Ok(HiddenWeights { w, b, rf: None })
}

/// Standard deviation of localized Gaussian weights, `sqrt(c / (100 p))`.
pub fn localized_std(patch_side: usize, c: f64) -> f64 {
    (c / (100.0 * patch_side as f64)).sqrt()
}

/// Expected L2 norm of a localized Gaussian row: `sqrt(p² C c / (100 p))`.
pub fn localized_row_norm(patch_side: usize, channels: usize, c: f64) -> f64 {
    ((patch_side * patch_side * channels) as f64).sqrt() * localized_std(patch_side, c)
}

/// Gaussian weights restricted to one random `p × p` patch per unit.
pub fn init_random_localized(
    n_h: usize,
    dims: ImageDims,
    patch_side: usize,
    c: f64,
    seed: u64,
) -> Result<HiddenWeights> {
    check_hidden(n_h)?;
    if !(c > 0.0) {
        return Err(Error::argument("c", "variance constant must be positive"));
    }
    let rf = ReceptiveFieldMap::random(n_h, dims, patch_side, &mut seeded_rng(seed, STREAM_PATCHES))?;
    let normal = Normal::new(0.0, localized_std(patch_side, c)).expect("finite std");
    let mut rng = seeded_rng(seed, STREAM_WEIGHTS);
    let mut w = Array2::zeros((n_h, dims.input_dim()));
    for (i, list) in rf.index_lists.iter().enumerate() {
        for &j in list {
            w[[i, j]] = normal.sample(&mut rng);
        }
    }
    let b = uniform_bias(n_h, &mut seeded_rng(seed, STREAM_BIAS));
    Ok(HiddenWeights { w, b, rf: Some(rf) })
}

/// Writes a Gabor filter into each unit's patch and rescales the row to
/// `row_norm`. Colour channels share the same filter.
fn fill_gabor(w: &mut Array2<f64>, rf: &ReceptiveFieldMap, intervals: &GaborIntervals, row_norm: f64, rng: &mut Rng) {
    let p = rf.patch_side;
    let half = (p as f64 - 1.0) / 2.0;
    let ch = rf.dims.channels;
    for (i, list) in rf.index_lists.iter().enumerate() {
        let g = intervals.sample(rng);
        // index_lists enumerate (row, col, channel) in patch order.
        let mut k = 0;
        for r in 0..p {
            for c in 0..p {
                let v = gabor_value(c as f64 - half, r as f64 - half, &g);
                for _ in 0..ch {
                    w[[i, list[k]]] = v;
                    k += 1;
                }
            }
        }
        let norm = w.row(i).dot(&w.row(i)).sqrt();
        if norm > 0.0 {
            w.row_mut(i).mapv_inplace(|v| v * row_norm / norm);
        }
    }
}

/// Random Gabor filters on random `p × p` patches, rows scaled to the
/// expected norm of localized Gaussian rows with constant `c`.
pub fn init_gabor_localized(
    n_h: usize,
    dims: ImageDims,
    patch_side: usize,
    intervals: &GaborIntervals,
    c: f64,
    seed: u64,
) -> Result<HiddenWeights> {
    check_hidden(n_h)?;
    intervals.validate()?;
    let rf = ReceptiveFieldMap::random(n_h, dims, patch_side, &mut seeded_rng(seed, STREAM_PATCHES))?;
    let mut w = Array2::zeros((n_h, dims.input_dim()));
    let norm = localized_row_norm(patch_side, dims.channels, c);
    fill_gabor(&mut w, &rf, intervals, norm, &mut seeded_rng(seed, STREAM_WEIGHTS));
    let b = uniform_bias(n_h, &mut seeded_rng(seed, STREAM_BIAS));
    Ok(HiddenWeights { w, b, rf: Some(rf) })
}

/// Fully connected Gabor layer: one image-sized patch located at the image
/// center, rows scaled to the expected norm of dense Gaussian rows.
pub fn init_gabor_full(n_h: usize, dims: ImageDims, intervals: &GaborIntervals, seed: u64) -> Result<HiddenWeights> {
    check_hidden(n_h)?;
    intervals.validate()?;
    if dims.height != dims.width {
        return Err(Error::argument("dims", "centered Gabor layer needs square images"));
    }
    let rf = ReceptiveFieldMap::centered(n_h, dims, dims.height)?;
    let mut w = Array2::zeros((n_h, dims.input_dim()));
    // E|w|² = d / (100 d) for dense Gaussian rows.
    fill_gabor(&mut w, &rf, intervals, 0.1, &mut seeded_rng(seed, STREAM_WEIGHTS));
    let b = uniform_bias(n_h, &mut seeded_rng(seed, STREAM_BIAS));
    Ok(HiddenWeights { w, b, rf: None })
}
