use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use super::network::{Backward, FeedbackMatrices, RateNetwork};
use crate::datasets::{Dataset, EpochSampler, NUM_CLASSES};
use crate::encoder::{encode_all, Encoder};
use crate::error::{Error, Result};
use crate::linalg::argmax;
use crate::record::{RunRecord, Snapshot};

/// Labelled network inputs, either precomputed or encoded on demand.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn input_into(&self, i: usize, out: &mut Array1<f64>);
    fn label(&self, i: usize) -> u8;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Inputs held in memory, one row per sample.
#[derive(Debug, Clone)]
pub struct CachedSource {
    pub inputs: Array2<f64>,
    pub labels: Vec<u8>,
}

impl CachedSource {
    pub fn raw(data: &Dataset) -> Self {
        CachedSource {
            inputs: data.vectors.clone(),
            labels: data.labels.clone(),
        }
    }

    pub fn encoded<E: Encoder + ?Sized>(encoder: &E, data: &Dataset) -> Self {
        CachedSource {
            inputs: encode_all(encoder, data),
            labels: data.labels.clone(),
        }
    }
}

impl SampleSource for CachedSource {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    fn input_into(&self, i: usize, out: &mut Array1<f64>) {
        out.assign(&self.inputs.row(i));
    }

    fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }
}

/// Encodes each sample when it is requested.
pub struct EncodedSource<'a, E: ?Sized> {
    pub encoder: &'a E,
    pub data: &'a Dataset,
}

impl<E: Encoder + ?Sized> SampleSource for EncodedSource<'_, E> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn input_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    fn input_into(&self, i: usize, out: &mut Array1<f64>) {
        self.encoder.encode_into(self.data.sample(i), out.view_mut());
    }

    fn label(&self, i: usize) -> u8 {
        self.data.labels[i]
    }
}

/// Features for `data`, cached when they fit in `budget_bytes`.
pub enum Features<'a, E: ?Sized> {
    Cached(CachedSource),
    OnTheFly(EncodedSource<'a, E>),
}

impl<'a, E: Encoder + ?Sized> Features<'a, E> {
    pub fn new(encoder: &'a E, data: &'a Dataset, budget_bytes: usize) -> Self {
        let bytes = data.len() * encoder.output_dim() * std::mem::size_of::<f64>();
        if bytes <= budget_bytes {
            Features::Cached(CachedSource::encoded(encoder, data))
        } else {
            Features::OnTheFly(EncodedSource { encoder, data })
        }
    }
}

impl<E: Encoder + ?Sized> SampleSource for Features<'_, E> {
    fn len(&self) -> usize {
        match self {
            Features::Cached(c) => c.len(),
            Features::OnTheFly(o) => o.len(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Features::Cached(c) => c.input_dim(),
            Features::OnTheFly(o) => o.input_dim(),
        }
    }

    fn input_into(&self, i: usize, out: &mut Array1<f64>) {
        match self {
            Features::Cached(c) => c.input_into(i, out),
            Features::OnTheFly(o) => o.input_into(i, out),
        }
    }

    fn label(&self, i: usize) -> u8 {
        match self {
            Features::Cached(c) => c.label(i),
            Features::OnTheFly(o) => o.label(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Delta rule on the readout of a frozen hidden layer.
    Delta,
    /// Single-layer perceptron on the raw input.
    Sp,
    Bp,
    Fa,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Delta => "delta",
            Algorithm::Sp => "sp",
            Algorithm::Bp => "bp",
            Algorithm::Fa => "fa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub iterations: u64,
    pub seed: u64,
    pub eval_every: u64,
    /// Training accuracy is measured on at most this many samples.
    pub train_eval_limit: Option<usize>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            algorithm: Algorithm::Delta,
            alpha: 1e-3,
            iterations: 10_000_000,
            seed: 0,
            eval_every: 100_000,
            train_eval_limit: None,
        }
    }
}

/// `α · 5000 / n_h` for hidden layers wider than 5000, `α` otherwise.
pub fn effective_alpha(alpha: f64, n_h: usize) -> f64 {
    if n_h > 5000 {
        alpha * 5000.0 / n_h as f64
    } else {
        alpha
    }
}

pub fn predict_class(net: &RateNetwork, x: ArrayView1<f64>) -> usize {
    argmax(net.predict(x).view())
}

/// Fraction of the first `limit` samples classified correctly (argmax,
/// ties to the lowest class).
pub fn evaluate<S: SampleSource + ?Sized>(net: &RateNetwork, source: &S, limit: Option<usize>) -> f64 {
    let n = limit.map_or(source.len(), |l| l.min(source.len()));
    if n == 0 {
        return 0.0;
    }
    let correct: usize = (0..n)
        .into_par_iter()
        .map_init(
            || Array1::zeros(source.input_dim()),
            |buf, i| {
                source.input_into(i, buf);
                usize::from(predict_class(net, buf.view()) == source.label(i) as usize)
            },
        )
        .sum();
    correct as f64 / n as f64
}

/// Online SGD with constant learning rate. Snapshots are taken before
/// training, every `eval_every` updates and after the last update.
pub fn train<S: SampleSource + ?Sized, T: SampleSource + ?Sized>(
    net: &mut RateNetwork,
    train_set: &S,
    test_set: &T,
    spec: &TrainSpec,
    feedback: Option<&FeedbackMatrices>,
) -> Result<RunRecord> {
    if train_set.input_dim() != net.input_dim() || test_set.input_dim() != net.input_dim() {
        return Err(Error::Dimension {
            what: "network input",
            expected: net.input_dim(),
            actual: train_set.input_dim(),
        });
    }
    if net.output_dim() != NUM_CLASSES {
        return Err(Error::Dimension {
            what: "network output",
            expected: NUM_CLASSES,
            actual: net.output_dim(),
        });
    }
    if train_set.is_empty() {
        return Err(Error::argument("train_set", "no training samples"));
    }
    let (from, backward) = match spec.algorithm {
        Algorithm::Delta => (net.layers.len() - 1, Backward::Transpose),
        Algorithm::Sp => {
            if net.layers.len() != 1 {
                return Err(Error::argument("algorithm", "sp trains a network without hidden layers"));
            }
            (0, Backward::Transpose)
        }
        Algorithm::Bp => (0, Backward::Transpose),
        Algorithm::Fa => {
            let fb = feedback.ok_or_else(|| Error::argument("feedback", "fa needs feedback matrices"))?;
            net.check_feedback(fb)?;
            (0, Backward::Feedback(fb))
        }
    };

    let start = Instant::now();
    let mut record = RunRecord::default();
    let snapshot = |net: &RateNetwork, iteration: u64, record: &mut RunRecord| {
        let snap = Snapshot {
            iteration,
            train_acc: evaluate(net, train_set, spec.train_eval_limit),
            test_acc: evaluate(net, test_set, None),
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "iter {iteration}: train {:.4} test {:.4} ({:.1}s)",
            snap.train_acc,
            snap.test_acc,
            snap.wall_time
        );
        record.snapshots.push(snap);
    };
    snapshot(net, 0, &mut record);

    let mut sampler = EpochSampler::new(train_set.len(), spec.seed);
    let mut x = Array1::zeros(train_set.input_dim());
    let mut target = Array1::zeros(NUM_CLASSES);
    for it in 1..=spec.iterations {
        let i = sampler.next().expect("non-empty");
        train_set.input_into(i, &mut x);
        target.fill(0.0);
        target[train_set.label(i) as usize] = 1.0;
        net.step(x.view(), target.view(), spec.alpha, from, backward);
        if (spec.eval_every > 0 && it % spec.eval_every == 0) || it == spec.iterations {
            snapshot(net, it, &mut record);
        }
    }
    Ok(record)
}
