//! Frozen hidden-layer encoders feeding a readout.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use rayon::prelude::*;

use crate::datasets::Dataset;

/// Maps an input vector to hidden activations.
pub trait Encoder: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn encode_into(&self, x: ArrayView1<f64>, out: ArrayViewMut1<f64>);

    fn encode(&self, x: ArrayView1<f64>) -> ndarray::Array1<f64> {
        let mut out = ndarray::Array1::zeros(self.output_dim());
        self.encode_into(x, out.view_mut());
        out
    }
}

/// Encodes every sample of `data` (rows of the result).
pub fn encode_all<E: Encoder + ?Sized>(encoder: &E, data: &Dataset) -> Array2<f64> {
    let mut out = Array2::zeros((data.len(), encoder.output_dim()));
    out.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, row)| encoder.encode_into(data.sample(i), row));
    out
}

/// The raw input as its own encoding (no hidden layer).
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl Encoder for Identity {
    fn input_dim(&self) -> usize {
        self.0
    }

    fn output_dim(&self) -> usize {
        self.0
    }

    fn encode_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        out.assign(&x);
    }
}
