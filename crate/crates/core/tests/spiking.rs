use ndarray::{array, Array1};
use proptest::prelude::*;

use shallownet::connectivity::init_random_localized;
use shallownet::datasets::{preprocess, Dataset, ImageDims, RawDataset, Split};
use shallownet::spiking::fidelity::{event_euler_deviation, isi_rate, random_network, stdp_vs_rate_rule, toy_pair};
use shallownet::spiking::{
    classify_spiking, from_hidden, present_train, Integration, LifLayer, LifParams, Projection, Protocol, RunOptions,
    SpikeRecord, SpikingDiagnostics, SpikingNetwork, DEFAULT_TAU_TR,
};

fn toy_data(n: usize) -> Dataset {
    let dims = ImageDims::new(6, 6, 1);
    let images = (0..n * 36).map(|k| if (k % 36) % 10 == (k / 36) % 10 { 220 } else { 10 }).collect();
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    preprocess(&RawDataset::new(images, labels, dims, Split::Train).unwrap(), None).unwrap()
}

fn toy_network(seed: u64) -> SpikingNetwork {
    let data = toy_data(10);
    let hidden = init_random_localized(40, data.dims, 3, 3.0, seed).unwrap();
    from_hidden(&hidden, 10, LifParams::default(), DEFAULT_TAU_TR, seed).unwrap()
}

#[test]
fn isi_matches_lif_rate_in_event_mode() {
    for ratio in [1.2, 2.0, 5.0] {
        let (sim, pred) = isi_rate(ratio, Integration::Event, 50).unwrap();
        assert!(((sim - pred) / pred).abs() < 1e-9, "ratio {ratio}: {sim} vs {pred}");
    }
}

#[test]
fn isi_matches_lif_rate_in_euler_mode() {
    for ratio in [1.2, 2.0, 5.0] {
        let (sim, pred) = isi_rate(ratio, Integration::Euler { dt: 0.01 }, 50).unwrap();
        assert!(((sim - pred) / pred).abs() < 0.02, "ratio {ratio}: {sim} vs {pred}");
    }
}

#[test]
fn euler_spike_times_track_event_times() {
    let times = |mode| {
        let mut net = random_network(3, [1, 1, 1]).unwrap();
        net.layers[0].drive[0] = 40.0;
        let mut r: Vec<SpikeRecord> = Vec::new();
        net.run(
            300.0,
            mode,
            RunOptions {
                raster: Some(&mut r),
                ..RunOptions::default()
            },
        )
        .unwrap();
        r.into_iter().filter(|s| s.layer == 0).map(|s| s.time).collect::<Vec<_>>()
    };
    let dt = 0.01;
    let (ev, eu) = (times(Integration::Event), times(Integration::Euler { dt }));
    assert_eq!(ev.len(), eu.len());
    for (a, b) in ev.iter().zip(&eu) {
        assert!((a - b).abs() <= 2.0 * dt, "{a} vs {b}");
    }
}

#[test]
fn event_and_euler_counts_agree() {
    for seed in 0..3 {
        let dev = event_euler_deviation(seed, 1000.0, 0.01).unwrap();
        assert!(dev <= 0.02, "seed {seed}: deviation {dev}");
    }
}

#[test]
fn stdp_drift_matches_rate_rule() {
    let (measured, predicted) = stdp_vs_rate_rule(5000.0, Integration::Event).unwrap();
    assert!(predicted > 0.0);
    assert!(((measured - predicted) / predicted).abs() < 0.05, "{measured} vs {predicted}");
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let data = toy_data(10);
    let mut net = toy_network(1);
    let before = net.plastic().clone();
    let mut diag = SpikingDiagnostics::default();
    for i in 0..5 {
        present_train(
            &mut net,
            &Protocol::default(),
            data.sample(i),
            data.labels[i] as usize,
            0.0,
            Integration::Euler { dt: 0.05 },
            &mut diag,
            None,
        )
        .unwrap();
    }
    assert_eq!(net.plastic(), &before);
}

#[test]
fn learning_is_gated_during_the_transient() {
    let data = toy_data(10);
    let mut net = toy_network(2);
    let mut diag = SpikingDiagnostics::default();
    for i in 0..10 {
        present_train(
            &mut net,
            &Protocol::default(),
            data.sample(i),
            data.labels[i] as usize,
            1.0,
            Integration::Event,
            &mut diag,
            None,
        )
        .unwrap();
    }
    assert_eq!(diag.gated_abs_dw, 0.0);
    assert!(diag.learning_abs_dw > 0.0);
}

#[test]
fn identical_seeds_give_identical_rasters() {
    let data = toy_data(10);
    for mode in [Integration::Event, Integration::Euler { dt: 0.05 }] {
        let raster = || {
            let mut net = toy_network(4);
            let mut r = Vec::new();
            let mut diag = SpikingDiagnostics::default();
            for i in 0..3 {
                present_train(&mut net, &Protocol::default(), data.sample(i), i, 0.5, mode, &mut diag, Some(&mut r))
                    .unwrap();
            }
            (r, net.plastic().clone())
        };
        assert_eq!(raster(), raster());
    }
}

#[test]
fn silent_output_increments_every_pre_spike_by_alpha_target() {
    let lif = LifParams {
        theta_std: 0.0,
        ..LifParams::default()
    };
    let mut pre = LifLayer::with_state(vec![0.0], vec![20.0]);
    pre.drive[0] = 40.0;
    let post = LifLayer::with_state(vec![0.0], vec![20.0]);
    let mut net = SpikingNetwork::new(lif, 20.0, vec![pre, post], vec![Projection::plastic(array![[0.0]])]).unwrap();
    net.target[0] = 0.05;
    let alpha = 0.01;
    let stats = net
        .run(
            200.0,
            Integration::Event,
            RunOptions {
                learning: Some(alpha),
                ..RunOptions::default()
            },
        )
        .unwrap();
    assert_eq!(stats.counts[1][0], 0);
    let n_pre = stats.counts[0][0] as f64;
    assert!(n_pre > 5.0);
    assert!((net.plastic()[[0, 0]] - n_pre * alpha * 0.05).abs() < 1e-12);
}

#[test]
fn matched_trace_gives_zero_update() {
    let lif = LifParams {
        theta_std: 0.0,
        ..LifParams::default()
    };
    let mut pre = LifLayer::with_state(vec![0.0], vec![20.0]);
    pre.drive[0] = 40.0;
    let post = LifLayer::with_state(vec![0.0], vec![20.0]);
    let mut net = SpikingNetwork::new(lif, 20.0, vec![pre, post], vec![Projection::plastic(array![[-3.0]])]).unwrap();
    let stats = net
        .run(
            200.0,
            Integration::Event,
            RunOptions {
                learning: Some(1.0),
                ..RunOptions::default()
            },
        )
        .unwrap();
    assert!(stats.counts[0][0] > 0);
    assert_eq!(net.plastic()[[0, 0]], -3.0);
}

#[test]
fn toy_weight_falls_while_trace_exceeds_target() {
    let (raster, samples) = toy_pair(2000.0, 10.0, 1200.0).unwrap();
    let pre: Vec<f64> = raster.iter().filter(|s| s.layer == 0).map(|s| s.time).collect();
    assert!(pre.len() > 10);
    let isi: Vec<f64> = pre.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(isi.iter().all(|d| (d - isi[0]).abs() < 1e-9), "input spikes are periodic");
    assert!(raster.iter().any(|s| s.layer == 1));
    for pair in samples.windows(2) {
        let ((_, w0, tr0), (_, w1, tr1)) = (pair[0], pair[1]);
        if tr0 > 0.005 && tr1 > 0.005 {
            assert!(w1 <= w0, "weight rose from {w0} to {w1} above target");
        }
    }
    assert!(samples.last().unwrap().1 < 1200.0);
}

#[test]
fn silent_network_predicts_class_zero() {
    let data = toy_data(10);
    let mut net = toy_network(5);
    net.projections[1].w.fill(-100.0);
    let mut diag = SpikingDiagnostics::default();
    let acc = classify_spiking(&net, &Protocol::default(), &data, None, Integration::Euler { dt: 0.1 }, &mut diag)
        .unwrap();
    assert_eq!(diag.silent_outputs, 10);
    assert!((acc - 0.1).abs() < 1e-12);
}

#[test]
fn input_dimension_mismatch_is_rejected() {
    let mut net = toy_network(6);
    let x = Array1::zeros(35);
    assert!(Protocol::default().apply_input(&mut net, x.view()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn traces_and_counts_stay_bounded(seed in 0u64..1000, drive in 20.0f64..120.0) {
        let mut net = random_network(seed, [8, 6, 4]).unwrap();
        net.layers[0].drive.iter_mut().for_each(|d| *d = drive);
        net.target.iter_mut().for_each(|t| *t = 0.02);
        let stats = net
            .run(100.0, Integration::Event, RunOptions { learning: Some(0.1), ..RunOptions::default() })
            .unwrap();
        for i in 0..4 {
            prop_assert!(net.trace_at(i, net.time) >= 0.0);
        }
        for c in stats.counts.iter().flatten() {
            prop_assert!((*c as f64) <= 100.0 + 1.0);
        }
        prop_assert!(net.plastic().iter().all(|w| w.is_finite()));
    }
}
