//! Hidden layers made of independent populations, each fit on its own
//! receptive field.

use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rayon::prelude::*;

use super::projection::{fit_ica, fit_pca, IcaOptions, ProjectionMatrix};
use super::sparse::{fit_sc, ScParams, SparseCoder};
use crate::connectivity::ReceptiveFieldMap;
use crate::datasets::{EpochSampler, ImageDims};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{relu, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsupMethod {
    Pca,
    Ica,
    Sc,
}

impl UnsupMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnsupMethod::Pca => "pca",
            UnsupMethod::Ica => "ica",
            UnsupMethod::Sc => "sc",
        }
    }
}

impl std::str::FromStr for UnsupMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(UnsupMethod::Pca),
            "ica" => Ok(UnsupMethod::Ica),
            "sc" => Ok(UnsupMethod::Sc),
            other => Err(Error::argument("method", format!("unknown unsupervised method `{other}`"))),
        }
    }
}

/// `n_pop` patches and the hidden-unit range owned by each.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPartition {
    pub rf: ReceptiveFieldMap,
    pub ranges: Vec<Range<usize>>,
}

impl PopulationPartition {
    /// Splits `n_h` units as evenly as possible over `n_pop` random patches;
    /// the first `n_h mod n_pop` populations get one extra unit.
    pub fn random(n_h: usize, n_pop: usize, dims: ImageDims, patch_side: usize, seed: u64) -> Result<Self> {
        if n_pop == 0 {
            return Err(Error::argument("n_pop", "need at least one population"));
        }
        if n_h < n_pop {
            return Err(Error::argument("n_h", format!("n_h = {n_h} is smaller than n_pop = {n_pop}")));
        }
        let rf = ReceptiveFieldMap::random(n_pop, dims, patch_side, &mut seeded_rng(seed, 0x909))?;
        Ok(Self::with_map(n_h, rf))
    }

    pub fn with_map(n_h: usize, rf: ReceptiveFieldMap) -> Self {
        let n_pop = rf.len();
        let (base, extra) = (n_h / n_pop, n_h % n_pop);
        let mut start = 0;
        let ranges = (0..n_pop)
            .map(|k| {
                let len = base + usize::from(k < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        PopulationPartition { rf, ranges }
    }

    pub fn n_pop(&self) -> usize {
        self.ranges.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationModel {
    Projection(ProjectionMatrix),
    Sparse(SparseCoder),
}

impl PopulationModel {
    fn encode_into(&self, x: ArrayView1<f64>, out: ArrayViewMut1<f64>) {
        match self {
            PopulationModel::Projection(p) => p.project_into(x, out),
            PopulationModel::Sparse(s) => s.encode_into(x, out),
        }
    }
}

/// Concatenated population outputs; PCA/ICA outputs are thresholded at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedEncoder {
    pub method: UnsupMethod,
    pub partition: PopulationPartition,
    pub populations: Vec<PopulationModel>,
}

impl LocalizedEncoder {
    /// Outputs before the ReLU applied to PCA/ICA populations.
    pub fn encode_pre_threshold(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let mut patch = Vec::new();
        for (k, model) in self.populations.iter().enumerate() {
            patch.clear();
            patch.extend(self.partition.rf.index_lists[k].iter().map(|&j| x[j]));
            let range = self.partition.ranges[k].clone();
            model.encode_into(ArrayView1::from(&patch[..]), out.slice_mut(ndarray::s![range]));
        }
    }
}

impl Encoder for LocalizedEncoder {
    fn input_dim(&self) -> usize {
        self.partition.rf.dims.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.partition.n_hidden()
    }

    fn encode_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        self.encode_pre_threshold(x, out.view_mut());
        if self.method != UnsupMethod::Sc {
            out.mapv_inplace(relu);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub ica: IcaOptions,
    pub sc: ScParams,
    /// Fit PCA/ICA on at most this many leading samples (0 = all).
    pub max_samples: usize,
    pub seed: u64,
}

/// Fits one model per population on its patch inputs, in parallel.
pub fn fit_localized(
    data: ArrayView2<f64>,
    method: UnsupMethod,
    partition: PopulationPartition,
    opts: FitOptions,
) -> Result<LocalizedEncoder> {
    let dims = partition.rf.dims;
    if data.ncols() != dims.input_dim() {
        return Err(Error::Dimension {
            what: "sample length",
            expected: dims.input_dim(),
            actual: data.ncols(),
        });
    }
    let rows = if opts.max_samples == 0 {
        data.nrows()
    } else {
        opts.max_samples.min(data.nrows())
    };
    let populations = (0..partition.n_pop())
        .into_par_iter()
        .map(|k| {
            let n = partition.ranges[k].len();
            let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
            let local: Array2<f64> = data.select(Axis(1), &partition.rf.index_lists[k]);
            match method {
                UnsupMethod::Pca => fit_pca(local.slice(ndarray::s![..rows, ..]), n).map(PopulationModel::Projection),
                UnsupMethod::Ica => fit_ica(local.slice(ndarray::s![..rows, ..]), n, IcaOptions { seed, ..opts.ica })
                    .map(PopulationModel::Projection),
                UnsupMethod::Sc => {
                    let order = EpochSampler::new(local.nrows(), seed);
                    fit_sc(local.view(), n, opts.sc, seed, order).map(PopulationModel::Sparse)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalizedEncoder {
        method,
        partition,
        populations,
    })
}

/// Globally fit unsupervised encoder (one population spanning all inputs,
/// no threshold on PCA/ICA outputs).
pub fn fit_global(data: ArrayView2<f64>, method: UnsupMethod, n_h: usize, opts: FitOptions) -> Result<PopulationModel> {
    let rows = if opts.max_samples == 0 {
        data.nrows()
    } else {
        opts.max_samples.min(data.nrows())
    };
    let head = data.slice(ndarray::s![..rows, ..]);
    match method {
        UnsupMethod::Pca => fit_pca(head, n_h).map(PopulationModel::Projection),
        UnsupMethod::Ica => fit_ica(head, n_h, IcaOptions { seed: opts.seed, ..opts.ica }).map(PopulationModel::Projection),
        UnsupMethod::Sc => {
            let order = EpochSampler::new(data.nrows(), opts.seed);
            fit_sc(data, n_h, opts.sc, opts.seed, order).map(PopulationModel::Sparse)
        }
    }
}

impl Encoder for PopulationModel {
    fn input_dim(&self) -> usize {
        match self {
            PopulationModel::Projection(p) => p.input_dim(),
            PopulationModel::Sparse(s) => s.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            PopulationModel::Projection(p) => p.output_dim(),
            PopulationModel::Sparse(s) => s.output_dim(),
        }
    }

    fn encode_into(&self, x: ArrayView1<f64>, out: ArrayViewMut1<f64>) {
        PopulationModel::encode_into(self, x, out)
    }
}

/// Helper for tests and diagnostics: encodes every row.
pub fn encode_rows<E: Encoder + ?Sized>(encoder: &E, data: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((data.nrows(), encoder.output_dim()));
    for (x, row) in data.rows().into_iter().zip(out.rows_mut()) {
        encoder.encode_into(x, row);
    }
    out
}
