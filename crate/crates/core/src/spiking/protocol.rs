use std::path::Path;
use std::time::Instant;

use ndarray::ArrayView1;

use super::network::{Integration, RunOptions, RunStats, SpikeRecord, SpikingNetwork};
use crate::datasets::{Dataset, EpochSampler};
use crate::error::{Error, Result};
use crate::record::{RunRecord, Snapshot};

/// Timing and amplitude of pattern presentations. Times in ms, currents in
/// units such that `R·I` is in mV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    /// Learning-gated window at the start of every presentation.
    pub t_trans: f64,
    pub t_pat_train: f64,
    pub t_pat_test: f64,
    pub amp_inp: f64,
    /// Target rate of the correct output is `amp_tgt / 1000` kHz.
    pub amp_tgt: f64,
    pub i_bias: f64,
    /// Delay of the target switch after input onset.
    pub target_delay: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            t_trans: 100.0,
            t_pat_train: 50.0,
            t_pat_test: 200.0,
            amp_inp: 500.0,
            amp_tgt: 500.0,
            i_bias: 20.0,
            target_delay: 0.0,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_trans", self.t_trans),
            ("t_pat_train", self.t_pat_train),
            ("t_pat_test", self.t_pat_test),
            ("amp_inp", self.amp_inp),
            ("amp_tgt", self.amp_tgt),
            ("target_delay", self.target_delay),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("{v} must be finite and nonnegative")));
            }
        }
        if self.t_pat_train == 0.0 || self.t_pat_test == 0.0 {
            return Err(Error::config("t_pat_train", "presentation windows must be positive"));
        }
        if self.target_delay > self.t_trans {
            return Err(Error::config("target_delay", "must not exceed t_trans"));
        }
        Ok(())
    }

    /// Sets input drives for pattern `x` and bias drives elsewhere.
    pub fn apply_input(&self, net: &mut SpikingNetwork, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != net.layers[0].len() {
            return Err(Error::Dimension {
                what: "spiking input",
                expected: net.layers[0].len(),
                actual: x.len(),
            });
        }
        let r = net.lif.r;
        for (d, &xi) in net.layers[0].drive.iter_mut().zip(x) {
            *d = r * (self.amp_inp * xi + self.i_bias);
        }
        for layer in net.layers.iter_mut().skip(1) {
            layer.drive.iter_mut().for_each(|d| *d = r * self.i_bias);
        }
        Ok(())
    }

    pub fn apply_target(&self, net: &mut SpikingNetwork, label: usize) {
        let t = self.amp_tgt / 1000.0;
        for (i, v) in net.target.iter_mut().enumerate() {
            *v = if i == label { t } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikingTrainSpec {
    pub alpha: f64,
    pub presentations: u64,
    pub seed: u64,
    pub mode: Integration,
    /// Presentations between evaluations; 0 evaluates only at the end.
    pub eval_every: u64,
    pub train_eval_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for SpikingTrainSpec {
    fn default() -> Self {
        SpikingTrainSpec {
            alpha: 2e-4,
            presentations: 6_000_000,
            seed: 0,
            mode: Integration::Event,
            eval_every: 0,
            train_eval_limit: Some(1000),
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpikingDiagnostics {
    /// Σ|ΔW| over all learning-gated windows.
    pub gated_abs_dw: f64,
    /// Σ|ΔW| over learning windows.
    pub learning_abs_dw: f64,
    /// Test presentations without any output spike.
    pub silent_outputs: u64,
    /// (presentation, neuron) pairs whose rate exceeded 1 kHz.
    pub rate_bound_violations: u64,
    pub presentations: u64,
}

fn count_rate_violations(stats: &RunStats) -> u64 {
    let limit = stats.duration;
    stats
        .counts
        .iter()
        .flatten()
        .filter(|&&c| c as f64 > limit)
        .count() as u64
}

fn l1_diff(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// One training presentation: gated transient, then the learning window.
#[allow(clippy::too_many_arguments)]
pub fn present_train(
    net: &mut SpikingNetwork,
    protocol: &Protocol,
    x: ArrayView1<f64>,
    label: usize,
    alpha: f64,
    mode: Integration,
    diag: &mut SpikingDiagnostics,
    mut raster: Option<&mut Vec<SpikeRecord>>,
) -> Result<()> {
    protocol.apply_input(net, x)?;
    let before = net.plastic().clone();
    let mut stats = Vec::with_capacity(3);
    let mut segment = |net: &mut SpikingNetwork, duration: f64, learning: Option<f64>| -> Result<()> {
        let s = net.run(
            duration,
            mode,
            RunOptions {
                learning,
                raster: raster.as_deref_mut(),
            },
        )?;
        stats.push(s);
        Ok(())
    };
    segment(net, protocol.target_delay, None)?;
    protocol.apply_target(net, label);
    segment(net, protocol.t_trans - protocol.target_delay, None)?;
    diag.gated_abs_dw += l1_diff(net.plastic(), &before);
    segment(net, protocol.t_pat_train, Some(alpha))?;
    let learn = stats.last().expect("three segments");
    diag.learning_abs_dw += learn.abs_dw;
    diag.rate_bound_violations += count_rate_violations(learn);
    diag.presentations += 1;
    Ok(())
}

/// Output spike counts during the test window after a transient.
pub fn present_test(net: &mut SpikingNetwork, protocol: &Protocol, x: ArrayView1<f64>, mode: Integration) -> Result<RunStats> {
    protocol.apply_input(net, x)?;
    net.run(protocol.t_trans, mode, RunOptions::default())?;
    net.run(protocol.t_pat_test, mode, RunOptions::default())
}

/// Class with the most output spikes; ties go to the lowest index, so a
/// silent output layer predicts class 0.
pub fn decide(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Accuracy over the first `limit` samples. Runs on a copy of `net`.
pub fn classify_spiking(
    net: &SpikingNetwork,
    protocol: &Protocol,
    data: &Dataset,
    limit: Option<usize>,
    mode: Integration,
    diag: &mut SpikingDiagnostics,
) -> Result<f64> {
    let n = limit.unwrap_or(data.len()).min(data.len());
    if n == 0 {
        return Ok(f64::NAN);
    }
    let mut net = net.clone();
    let last = net.layers.len() - 1;
    let mut correct = 0usize;
    for i in 0..n {
        let stats = present_test(&mut net, protocol, data.sample(i), mode)?;
        let counts = &stats.counts[last];
        if counts.iter().all(|&c| c == 0) {
            diag.silent_outputs += 1;
        }
        diag.rate_bound_violations += count_rate_violations(&stats);
        if decide(counts) == data.labels[i] as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Trains the plastic projection with supervised STDP.
pub fn train_spiking(
    net: &mut SpikingNetwork,
    protocol: &Protocol,
    train: &Dataset,
    test: &Dataset,
    spec: &SpikingTrainSpec,
) -> Result<(RunRecord, SpikingDiagnostics)> {
    protocol.validate()?;
    if !(spec.alpha >= 0.0) {
        return Err(Error::config("alpha", "must be nonnegative"));
    }
    if train.is_empty() {
        return Err(Error::argument("train", "empty training set"));
    }
    let n_out = net.layers.last().expect("non-empty").len();
    if n_out != 10 {
        return Err(Error::Dimension {
            what: "spiking output layer",
            expected: 10,
            actual: n_out,
        });
    }
    let start = Instant::now();
    let mut diag = SpikingDiagnostics::default();
    let mut eval_diag = SpikingDiagnostics::default();
    let mut record = RunRecord {
        config: vec![
            ("alpha".into(), spec.alpha.to_string()),
            ("presentations".into(), spec.presentations.to_string()),
            ("seed".into(), spec.seed.to_string()),
            ("integration".into(), format!("{:?}", spec.mode)),
        ],
        snapshots: Vec::new(),
    };
    let mut snapshot = |net: &SpikingNetwork, it: u64, d: &mut SpikingDiagnostics| -> Result<()> {
        let train_acc = classify_spiking(net, protocol, train, spec.train_eval_limit, spec.mode, d)?;
        let test_acc = classify_spiking(net, protocol, test, spec.test_limit, spec.mode, d)?;
        record.snapshots.push(Snapshot {
            iteration: it,
            train_acc,
            test_acc,
            wall_time: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };
    let mut order = EpochSampler::new(train.len(), spec.seed);
    for it in 1..=spec.presentations {
        let i = order.next().expect("non-empty sampler");
        present_train(
            net,
            protocol,
            train.sample(i),
            train.labels[i] as usize,
            spec.alpha,
            spec.mode,
            &mut diag,
            None,
        )?;
        if spec.eval_every > 0 && it % spec.eval_every == 0 && it != spec.presentations {
            snapshot(net, it, &mut eval_diag)?;
        }
    }
    snapshot(net, spec.presentations, &mut eval_diag)?;
    diag.silent_outputs = eval_diag.silent_outputs;
    diag.rate_bound_violations += eval_diag.rate_bound_violations;
    Ok((record, diag))
}

/// Spikes of all layers while presenting the first `n` samples.
pub fn record_raster(
    net: &mut SpikingNetwork,
    protocol: &Protocol,
    data: &Dataset,
    n: usize,
    alpha: f64,
    mode: Integration,
) -> Result<Vec<SpikeRecord>> {
    let mut raster = Vec::new();
    let mut diag = SpikingDiagnostics::default();
    for i in 0..n.min(data.len()) {
        present_train(
            net,
            protocol,
            data.sample(i),
            data.labels[i] as usize,
            alpha,
            mode,
            &mut diag,
            Some(&mut raster),
        )?;
    }
    Ok(raster)
}

/// CSV with columns `time,neuron,layer`.
pub fn write_raster_csv(path: &Path, spikes: &[SpikeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "neuron", "layer"])?;
    for s in spikes {
        w.write_record([s.time.to_string(), s.neuron.to_string(), s.layer.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule() {
        assert_eq!(decide(&[0, 0, 0]), 0);
        assert_eq!(decide(&[1, 3, 3]), 1);
        assert_eq!(decide(&[0, 0, 2]), 2);
    }

    #[test]
    fn protocol_validation_names_field() {
        let p = Protocol {
            target_delay: 200.0,
            ..Protocol::default()
        };
        match p.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "target_delay"),
            other => panic!("{other:?}"),
        }
    }
}
