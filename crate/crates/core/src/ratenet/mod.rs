//! Rate-based feedforward networks trained online with the delta rule,
//! backpropagation or feedback alignment.

pub mod activation;
pub mod check;
pub mod network;
pub mod train;

use std::path::Path;

use ndarray::{Array1, ArrayView1};

pub use activation::{lif_rate, lif_rate_derivative, Activation, LifRate};
pub use network::{softmax, Backward, Deltas, FeedbackMatrices, ForwardPass, Layer, Loss, RateNetwork};
pub use train::{
    effective_alpha, evaluate, predict_class, train, Algorithm, CachedSource, EncodedSource, Features, SampleSource,
    TrainSpec,
};

use crate::checkpoint::{self, Tensor};
use crate::error::Result;

/// Largest relative error `‖g_a − g_n‖ / (‖g_a‖ + ‖g_n‖)` over layers
/// `from..L` between the analytic gradient (taken from `deltas`, which are
/// `−α ∇L`) and central differences of the loss with step `h`.
pub fn gradient_check(
    net: &RateNetwork,
    x: ArrayView1<f64>,
    target: ArrayView1<f64>,
    deltas: &Deltas,
    alpha: f64,
    from: usize,
    h: f64,
) -> f64 {
    let loss_at = |n: &RateNetwork| n.loss_value(&n.forward_unchecked(x), target);
    let mut worst: f64 = 0.0;
    for l in from..net.layers.len() {
        let mask = net.layers[l].mask();
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let mut probe = net.clone();
        for ((i, j), &m) in mask.indexed_iter() {
            if !m {
                continue;
            }
            let w0 = probe.layers[l].w[[i, j]];
            probe.layers[l].w[[i, j]] = w0 + h;
            let up = loss_at(&probe);
            probe.layers[l].w[[i, j]] = w0 - h;
            let down = loss_at(&probe);
            probe.layers[l].w[[i, j]] = w0;
            numeric.push((up - down) / (2.0 * h));
            analytic.push(-deltas.w[l][[i, j]] / alpha);
        }
        for i in 0..net.layers[l].n_out() {
            let b0 = probe.layers[l].b[i];
            probe.layers[l].b[i] = b0 + h;
            let up = loss_at(&probe);
            probe.layers[l].b[i] = b0 - h;
            let down = loss_at(&probe);
            probe.layers[l].b[i] = b0;
            numeric.push((up - down) / (2.0 * h));
            analytic.push(-deltas.b[l][i] / alpha);
        }
        let a = Array1::from(analytic);
        let n = Array1::from(numeric);
        let diff = (&a - &n).mapv(|v| v * v).sum().sqrt();
        let scale = a.mapv(|v| v * v).sum().sqrt() + n.mapv(|v| v * v).sum().sqrt();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

/// Saves layer tensors as `W1, b1, W2, b2, …`.
pub fn save_network(path: &Path, net: &RateNetwork) -> Result<()> {
    let mut tensors = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("W{}", l + 1), &layer.w));
        tensors.push(Tensor::from_vector(format!("b{}", l + 1), &layer.b));
    }
    checkpoint::save(path, &tensors)
}

/// Restores weights saved by [`save_network`] into a network of the same
/// shape.
pub fn load_weights(path: &Path, net: &mut RateNetwork) -> Result<()> {
    let tensors = checkpoint::load(path)?;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let w = checkpoint::find(&tensors, &format!("W{}", l + 1))?.to_matrix()?;
        let b = checkpoint::find(&tensors, &format!("b{}", l + 1))?.to_vector()?;
        if w.dim() != layer.w.dim() || b.len() != layer.b.len() {
            return Err(crate::error::Error::argument(
                "checkpoint",
                format!("layer {} shape {:?} does not match {:?}", l + 1, w.dim(), layer.w.dim()),
            ));
        }
        layer.w = w;
        layer.b = b;
    }
    Ok(())
}
