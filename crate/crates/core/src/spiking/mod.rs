//! LIF networks with a fixed hidden layer and a readout trained by
//! supervised STDP, plus the mapping to their rate-based counterpart.

pub mod fidelity;
mod network;
mod protocol;

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};

pub use network::{
    Integration, LifLayer, LifParams, Projection, RunOptions, RunStats, SpikeRecord, SpikingNetwork,
    DEFAULT_RATE_CAP_KHZ,
};
pub use protocol::{
    classify_spiking, decide, present_test, present_train, record_raster, train_spiking, write_raster_csv, Protocol,
    SpikingDiagnostics, SpikingTrainSpec,
};

pub use crate::ratenet::lif_rate;
use crate::connectivity::HiddenWeights;
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;
use crate::ratenet::{Activation, Layer, LifRate, Loss, RateNetwork};

pub const DEFAULT_TAU_TR: f64 = 20.0;
/// Scale of the `N(0, 1)·gain/√fan_in` weight initialization.
pub const WEIGHT_GAIN: f64 = 20.0;

const STREAM_NEURONS: u64 = 0x11f;
const STREAM_READOUT: u64 = 0x12;

/// Input, hidden and output LIF layers. The hidden weights are rescaled so
/// their root-mean-square over each unit's inputs is `gain/√fan_in`; the
/// readout is drawn as `N(0, 1)·gain/√n_h`.
pub fn from_hidden(hidden: &HiddenWeights, n_out: usize, lif: LifParams, tau_tr: f64, seed: u64) -> Result<SpikingNetwork> {
    lif.validate()?;
    let (n_h, d) = hidden.w.dim();
    if n_h == 0 || d == 0 || n_out == 0 {
        return Err(Error::argument("hidden", "layers must be non-empty"));
    }
    let fan_in = hidden.rf.as_ref().map_or(d, |rf| rf.index_lists[0].len());
    let nonzero: Vec<f64> = hidden.w.iter().copied().filter(|&v| v != 0.0).collect();
    let rms = (nonzero.iter().map(|v| v * v).sum::<f64>() / nonzero.len().max(1) as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::argument("hidden", "all hidden weights are zero"));
    }
    let w1 = &hidden.w * (WEIGHT_GAIN / (fan_in as f64).sqrt() / rms);

    let mut rng = seeded_rng(seed, STREAM_READOUT);
    let scale = WEIGHT_GAIN / (n_h as f64).sqrt();
    let w2 = Array2::from_shape_fn((n_out, n_h), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    });

    let mut rng = seeded_rng(seed, STREAM_NEURONS);
    let layers = [d, n_h, n_out].iter().map(|&n| LifLayer::random(n, &lif, &mut rng)).collect();
    SpikingNetwork::new(lif, tau_tr, layers, vec![Projection::fixed(w1), Projection::plastic(w2)])
}

/// Readout learning rate of the rate model equivalent to STDP rate `alpha`
/// with learning windows of `t_pat` ms.
pub fn rate_alpha_from_stdp(alpha: f64, t_pat: f64) -> f64 {
    alpha * t_pat / 1e6
}

pub fn stdp_alpha_from_rate(alpha_rate: f64, t_pat: f64) -> f64 {
    (1000.0 / t_pat) * 1000.0 * alpha_rate
}

/// Rate network with LIF rate nonlinearities: `a_0 = φ(R(amp·x + I_bias))`
/// and `a_l = φ(R(W_l a_{l−1} + I_bias))`, rates in kHz.
pub fn to_rate_model(net: &SpikingNetwork, protocol: &Protocol) -> Result<RateNetwork> {
    let r = net.lif.r;
    let act = |l: usize| {
        Activation::Lif(Arc::new(LifRate {
            thresholds: net.layers[l].theta.clone(),
            tau_m: net.lif.tau_m,
            delta_abs: net.lif.delta_abs,
        }))
    };
    let n0 = net.layers[0].len();
    let mut layers = vec![Layer {
        w: Array2::from_diag_elem(n0, r * protocol.amp_inp),
        b: Array1::from_elem(n0, r * protocol.i_bias),
        act: act(0),
        inputs: Some((0..n0).map(|i| vec![i]).collect()),
    }];
    let last = net.projections.len() - 1;
    for (l, p) in net.projections.iter().enumerate() {
        let inputs = (l < last).then(|| {
            p.w.rows()
                .into_iter()
                .map(|row| row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, _)| j).collect())
                .collect()
        });
        layers.push(Layer {
            w: &p.w * r,
            b: Array1::from_elem(p.w.nrows(), r * protocol.i_bias),
            act: act(l + 1),
            inputs,
        });
    }
    RateNetwork::new(layers, Loss::Mse)
}

/// Copies the weights of a rate model built by [`to_rate_model`] back.
pub fn from_rate_model(rate: &RateNetwork, net: &mut SpikingNetwork) -> Result<()> {
    if rate.layers.len() != net.projections.len() + 1 {
        return Err(Error::argument("rate", "layer count does not match the spiking network"));
    }
    let r = net.lif.r;
    let last = net.projections.len() - 1;
    for (l, p) in net.projections.iter_mut().enumerate() {
        let w = &rate.layers[l + 1].w;
        if w.dim() != p.w.dim() {
            return Err(Error::Dimension {
                what: "rate-model weights",
                expected: p.w.len(),
                actual: w.len(),
            });
        }
        let w = w / r;
        *p = if l < last { Projection::fixed(w) } else { Projection::plastic(w) };
    }
    Ok(())
}

/// Rate-based analogue of the STDP rule on the last layer:
/// `ΔW = α̃·a_pre·(tgt − a_post)` with rates in Hz, `tgt` given in kHz.
pub fn lif_rate_update(rate: &mut RateNetwork, x: ArrayView1<f64>, target_khz: ArrayView1<f64>, alpha_rate: f64) -> Result<()> {
    let pass = rate.forward(x)?;
    let n = rate.layers.len();
    let a_pre = &pass.a[n - 1];
    let err = &target_khz - &pass.a[n];
    let scale = alpha_rate * 1e6;
    let w = &mut rate.layers[n - 1].w;
    for (i, &e) in err.iter().enumerate() {
        for (j, &a) in a_pre.iter().enumerate() {
            w[[i, j]] += scale * a * e;
        }
    }
    Ok(())
}
