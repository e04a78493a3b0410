//! Numerical checks of the simulator against closed forms and between
//! integration modes.

use ndarray::{array, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::network::{Integration, LifLayer, LifParams, Projection, RunOptions, SpikeRecord, SpikingNetwork};
use crate::error::Result;
use crate::linalg::seeded_rng;
use crate::ratenet::lif_rate;

fn single_pair(lif: LifParams, drive_pre: f64, drive_post: f64, w: f64) -> Result<SpikingNetwork> {
    let mut pre = LifLayer::with_state(vec![lif.u_reset], vec![lif.theta_mean]);
    pre.drive[0] = drive_pre;
    let mut post = LifLayer::with_state(vec![lif.u_reset], vec![lif.theta_mean]);
    post.drive[0] = drive_post;
    SpikingNetwork::new(lif, 20.0, vec![pre, post], vec![Projection::plastic(array![[w]])])
}

/// Firing rate (kHz) from the mean inter-spike interval of a neuron driven
/// at `u_ratio·ϑ`, together with the closed-form LIF rate.
pub fn isi_rate(u_ratio: f64, mode: Integration, spikes: usize) -> Result<(f64, f64)> {
    let lif = LifParams {
        theta_std: 0.0,
        ..LifParams::default()
    };
    let u = u_ratio * lif.theta_mean;
    let predicted = lif_rate(u, lif.theta_mean, lif.tau_m, lif.delta_abs);
    let mut net = single_pair(lif, u, 0.0, 0.0)?;
    let mut raster = Vec::new();
    net.run(
        (spikes as f64 + 1.5) / predicted,
        mode,
        RunOptions {
            raster: Some(&mut raster),
            ..RunOptions::default()
        },
    )?;
    let times: Vec<f64> = raster.iter().filter(|s| s.layer == 0).map(|s| s.time).collect();
    let n = times.len();
    let simulated = if n < 2 {
        0.0
    } else {
        (n - 1) as f64 / (times[n - 1] - times[0])
    };
    Ok((simulated, predicted))
}

/// Random three-layer network with constant, heterogeneous input drive.
pub fn random_network(seed: u64, sizes: [usize; 3]) -> Result<SpikingNetwork> {
    let lif = LifParams::default();
    let mut rng = seeded_rng(seed, 0xf1de);
    let layers: Vec<LifLayer> = sizes.iter().map(|&n| LifLayer::random(n, &lif, &mut rng)).collect();
    let mut net = SpikingNetwork::new(
        lif,
        20.0,
        layers,
        vec![
            Projection::fixed(gaussian(sizes[1], sizes[0], 40.0 / (sizes[0] as f64).sqrt(), &mut rng)),
            Projection::plastic(gaussian(sizes[2], sizes[1], 40.0 / (sizes[1] as f64).sqrt(), &mut rng)),
        ],
    )?;
    for d in net.layers[0].drive.iter_mut() {
        *d = rng.random_range(15.0..80.0);
    }
    for layer in net.layers.iter_mut().skip(1) {
        layer.drive.iter_mut().for_each(|d| *d = 20.0);
    }
    Ok(net)
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut crate::linalg::Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

/// `Σ_i |c_i^event − c_i^euler| / Σ_i c_i^event` over `duration` ms.
pub fn event_euler_deviation(seed: u64, duration: f64, dt: f64) -> Result<f64> {
    let net = random_network(seed, [40, 40, 10])?;
    let event = net.clone().run(duration, Integration::Event, RunOptions::default())?;
    let euler = net.clone().run(duration, Integration::Euler { dt }, RunOptions::default())?;
    let (mut diff, mut total) = (0u64, 0u64);
    for (a, b) in event.counts.iter().flatten().zip(euler.counts.iter().flatten()) {
        diff += a.abs_diff(*b) as u64;
        total += *a as u64;
    }
    Ok(diff as f64 / total.max(1) as f64)
}

/// Accumulated STDP weight change of one synapse over `duration` ms with
/// fixed pre and post drives, and the rate-rule prediction
/// `α·T·φ(u_pre)·(tgt − φ(u_post))`.
pub fn stdp_vs_rate_rule(duration: f64, mode: Integration) -> Result<(f64, f64)> {
    let lif = LifParams {
        theta_std: 0.0,
        ..LifParams::default()
    };
    let (u_pre, u_post, target, alpha) = (40.0, 30.0, 0.1, 1e-4);
    let mut net = single_pair(lif, u_pre, u_post, 0.0)?;
    net.target[0] = target;
    net.run(
        duration,
        mode,
        RunOptions {
            learning: Some(alpha),
            ..RunOptions::default()
        },
    )?;
    let rate = |u| lif_rate(u, lif.theta_mean, lif.tau_m, lif.delta_abs);
    let predicted = alpha * duration * rate(u_pre) * (target - rate(u_post));
    Ok((net.plastic()[[0, 0]], predicted))
}

/// `(time, weight, post trace)`.
pub type ToySample = (f64, f64, f64);

/// Pre/post toy with slow input (40 mV drive, τ_m = 50 ms), a 5 Hz target
/// trace and an initial weight `w0`; a PSP of `w0/τ_m` above threshold
/// makes the post neuron follow the input. Returns the raster and the weight and
/// post trace sampled every `sample_every` ms.
pub fn toy_pair(duration: f64, sample_every: f64, w0: f64) -> Result<(Vec<SpikeRecord>, Vec<ToySample>)> {
    let lif = LifParams {
        tau_m: 50.0,
        theta_std: 0.0,
        ..LifParams::default()
    };
    let mut net = single_pair(lif, 40.0, 0.0, w0)?;
    net.target[0] = 0.005;
    let mut raster = Vec::new();
    let mut samples = vec![(0.0, w0, 0.0)];
    let steps = (duration / sample_every).round() as usize;
    for _ in 0..steps {
        net.run(
            sample_every,
            Integration::Event,
            RunOptions {
                learning: Some(1.2e-5),
                raster: Some(&mut raster),
            },
        )?;
        samples.push((net.time, net.plastic()[[0, 0]], net.trace_at(0, net.time)));
    }
    Ok((raster, samples))
}
