//! Randomized agreement checks between analytic updates and finite
//! differences.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{gradient_check, Activation, FeedbackMatrices, Layer, LifRate, Loss, RateNetwork};
use crate::error::Result;
use crate::linalg::seeded_rng;

/// Network and update rule exercised by [`gradient_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientCase {
    DeltaMse,
    DeltaCe,
    BpMse,
    BpCe,
    /// Backpropagation through an LIF-rate hidden layer.
    BpLif,
    /// Backpropagation with a patch-masked hidden layer.
    BpMasked,
}

impl GradientCase {
    pub const ALL: [GradientCase; 6] = [
        GradientCase::DeltaMse,
        GradientCase::DeltaCe,
        GradientCase::BpMse,
        GradientCase::BpCe,
        GradientCase::BpLif,
        GradientCase::BpMasked,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GradientCase::DeltaMse => "delta/mse",
            GradientCase::DeltaCe => "delta/ce",
            GradientCase::BpMse => "bp/mse",
            GradientCase::BpCe => "bp/ce",
            GradientCase::BpLif => "bp/lif",
            GradientCase::BpMasked => "bp/masked",
        }
    }

    fn loss(&self) -> Loss {
        match self {
            GradientCase::DeltaCe | GradientCase::BpCe => Loss::Ce,
            _ => Loss::Mse,
        }
    }
}

const N_IN: usize = 9;
const N_HID: usize = 7;
const N_OUT: usize = 4;

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut crate::linalg::Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

/// ReLU layers get preactivations kept away from the kink so central
/// differences stay on one side of it.
fn random_instance(case: GradientCase, rng: &mut crate::linalg::Rng) -> (RateNetwork, Array1<f64>, Array1<f64>) {
    let loss = case.loss();
    let out_act = RateNetwork::output_activation(loss);
    let x = Array1::from_shape_fn(N_IN, |_| rng.random_range(-1.0..1.0));
    let readout = |n_in: usize, rng: &mut crate::linalg::Rng| Layer {
        w: gaussian(N_OUT, n_in, 1.0 / (n_in as f64).sqrt(), rng),
        b: Array1::from_shape_fn(N_OUT, |_| rng.random_range(0.2..0.8)),
        act: out_act.clone(),
        inputs: None,
    };
    let layers = match case {
        GradientCase::DeltaMse | GradientCase::DeltaCe => vec![readout(N_IN, rng)],
        GradientCase::BpMse | GradientCase::BpCe | GradientCase::BpMasked => {
            let mut hidden = Layer {
                w: gaussian(N_HID, N_IN, 1.0 / (N_IN as f64).sqrt(), rng),
                b: Array1::from_shape_fn(N_HID, |_| rng.random_range(-0.2..0.2)),
                act: Activation::Relu,
                inputs: None,
            };
            if case == GradientCase::BpMasked {
                let lists: Vec<Vec<usize>> = (0..N_HID).map(|i| (i..i + 3).collect()).collect();
                for (i, list) in lists.iter().enumerate() {
                    for j in 0..N_IN {
                        if !list.contains(&j) {
                            hidden.w[[i, j]] = 0.0;
                        }
                    }
                }
                hidden.inputs = Some(lists);
            }
            vec![hidden, readout(N_HID, rng)]
        }
        GradientCase::BpLif => {
            let lif = LifRate {
                thresholds: (0..N_HID).map(|_| rng.random_range(15.0..25.0)).collect(),
                tau_m: 25.0,
                delta_abs: 0.0,
            };
            let hidden = Layer {
                w: gaussian(N_HID, N_IN, 20.0 / (N_IN as f64).sqrt(), rng),
                b: Array1::from_elem(N_HID, 40.0),
                act: Activation::Lif(Arc::new(lif)),
                inputs: None,
            };
            vec![hidden, readout(N_HID, rng)]
        }
    };
    let mut net = RateNetwork::new(layers, loss).expect("consistent shapes");
    for l in 0..net.layers.len() {
        if net.layers[l].act != Activation::Relu {
            continue;
        }
        let pass = net.forward(x.view()).expect("matching input");
        for (i, &v) in pass.u[l].iter().enumerate() {
            if v.abs() < 0.05 {
                net.layers[l].b[i] += if v >= 0.0 { 0.1 } else { -0.1 };
            }
        }
    }
    let mut target = Array1::zeros(N_OUT);
    target[rng.random_range(0..N_OUT)] = 1.0;
    (net, x, target)
}

/// Worst relative error between analytic and central-difference gradients
/// over `instances` random networks of the given case.
pub fn gradient_suite(case: GradientCase, instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded_rng(seed, 0x6c);
    let alpha = 1.0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (net, x, target) = random_instance(case, &mut rng);
        let deltas = match case {
            GradientCase::DeltaMse | GradientCase::DeltaCe => net.delta_update(x.view(), target.view(), alpha)?,
            _ => net.bp_update(x.view(), target.view(), alpha)?,
        };
        worst = worst.max(gradient_check(&net, x.view(), target.view(), &deltas, alpha, 0, 1e-5));
    }
    Ok(worst)
}

/// Largest absolute difference between feedback alignment with `R = Wᵀ` and
/// backpropagation over random two-layer networks.
pub fn fa_transpose_gap(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded_rng(seed, 0xfb);
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let case = if k % 2 == 0 { GradientCase::BpMse } else { GradientCase::BpCe };
        let (net, x, target) = random_instance(case, &mut rng);
        let fa = net.fa_update(x.view(), target.view(), &FeedbackMatrices::transposes(&net), 0.1)?;
        let bp = net.bp_update(x.view(), target.view(), 0.1)?;
        for (a, b) in fa.w.iter().zip(&bp.w) {
            worst = worst.max((a - b).iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        for (a, b) in fa.b.iter().zip(&bp.b) {
            worst = worst.max((a - b).iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    Ok(worst)
}
