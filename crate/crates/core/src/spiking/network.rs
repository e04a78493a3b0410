use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Rng;

/// LIF neuron constants shared by every layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// ms
    pub tau_m: f64,
    pub r: f64,
    /// Absolute refractory period, ms.
    pub delta_abs: f64,
    /// mV
    pub theta_mean: f64,
    pub theta_std: f64,
    /// Thresholds are clipped from below at this value (mV).
    pub theta_min: f64,
    pub u_reset: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_m: 25.0,
            r: 1.0,
            delta_abs: 0.0,
            theta_mean: 20.0,
            theta_std: 1.0,
            theta_min: 5.0,
            u_reset: 0.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) {
            return Err(Error::config("tau_m", "must be positive"));
        }
        if !(self.r > 0.0) {
            return Err(Error::config("r", "must be positive"));
        }
        if !(self.delta_abs >= 0.0) {
            return Err(Error::config("delta_abs", "must be nonnegative"));
        }
        if !(self.theta_std >= 0.0) {
            return Err(Error::config("theta_std", "must be nonnegative"));
        }
        if !(self.theta_min.max(self.theta_mean) > self.u_reset) {
            return Err(Error::config("theta_mean", "threshold must exceed the reset potential"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration {
    /// Exact event-driven integration.
    Event,
    /// Euler-forward with step `dt` (ms).
    Euler { dt: f64 },
}

/// State of one layer of LIF neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer {
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    /// Constant external drive `R·I_ext` (mV).
    pub drive: Vec<f64>,
    pub last_spike: Vec<f64>,
    /// Time at which `u` was last brought up to date (event mode).
    t_state: Vec<f64>,
}

impl LifLayer {
    /// Thresholds `N(θ_mean, θ_std)` clipped at `θ_min`, starting
    /// potentials uniform in `[u_reset, θ_i)`.
    pub fn random(n: usize, lif: &LifParams, rng: &mut Rng) -> Self {
        let normal = Normal::new(lif.theta_mean, lif.theta_std).expect("validated std");
        let theta: Vec<f64> = (0..n)
            .map(|_| normal.sample(rng).max(lif.theta_min).max(lif.u_reset + 1e-9))
            .collect();
        let u = theta.iter().map(|&t| rng.random_range(lif.u_reset..t)).collect();
        Self::with_state(u, theta)
    }

    pub fn with_state(u: Vec<f64>, theta: Vec<f64>) -> Self {
        let n = u.len();
        LifLayer {
            u,
            theta,
            drive: vec![0.0; n],
            last_spike: vec![f64::NEG_INFINITY; n],
            t_state: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Weights from layer `l` to layer `l + 1` (`n_post × n_pre`).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: Array2<f64>,
    /// Nonzero weights grouped by presynaptic neuron, for fixed projections.
    fanout: Vec<Vec<(usize, f64)>>,
}

impl Projection {
    pub fn fixed(w: Array2<f64>) -> Self {
        let mut fanout = vec![Vec::new(); w.ncols()];
        for ((i, j), &v) in w.indexed_iter() {
            if v != 0.0 {
                fanout[j].push((i, v));
            }
        }
        Projection { w, fanout }
    }

    pub fn plastic(w: Array2<f64>) -> Self {
        Projection { w, fanout: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeRecord {
    pub time: f64,
    pub layer: usize,
    pub neuron: usize,
}

/// Per-run options.
#[derive(Debug, Default)]
pub struct RunOptions<'a> {
    /// STDP learning rate for the plastic projection; `None` disables
    /// learning.
    pub learning: Option<f64>,
    pub raster: Option<&'a mut Vec<SpikeRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Spike counts per layer and neuron.
    pub counts: Vec<Vec<u32>>,
    pub total_spikes: u64,
    /// Σ|Δw| applied to the plastic projection.
    pub abs_dw: f64,
    pub duration: f64,
}

/// Default spike-rate cap: ten times the 1 kHz design bound.
pub const DEFAULT_RATE_CAP_KHZ: f64 = 10.0;

/// Feedforward LIF network. Every projection is fixed except the last,
/// which learns with a trace-based supervised STDP rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikingNetwork {
    pub lif: LifParams,
    /// Spike-trace time constant (ms).
    pub tau_tr: f64,
    pub layers: Vec<LifLayer>,
    pub projections: Vec<Projection>,
    /// Postsynaptic traces of the last layer, valid at `trace_time`.
    pub trace: Vec<f64>,
    trace_time: Vec<f64>,
    /// Target traces of the last layer (kHz).
    pub target: Vec<f64>,
    pub time: f64,
    pub rate_cap_khz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    neuron: usize,
    version: u32,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.neuron.cmp(&other.neuron))
            .then(self.version.cmp(&other.version))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpikingNetwork {
    pub fn new(lif: LifParams, tau_tr: f64, layers: Vec<LifLayer>, projections: Vec<Projection>) -> Result<Self> {
        lif.validate()?;
        if !(tau_tr > 0.0) {
            return Err(Error::config("tau_tr", "must be positive"));
        }
        if layers.len() != projections.len() + 1 || projections.is_empty() {
            return Err(Error::argument("layers", "need L + 1 layers for L >= 1 projections"));
        }
        for (l, p) in projections.iter().enumerate() {
            if p.w.dim() != (layers[l + 1].len(), layers[l].len()) {
                return Err(Error::argument(
                    "projections",
                    format!(
                        "projection {l} is {:?}, expected {:?}",
                        p.w.dim(),
                        (layers[l + 1].len(), layers[l].len())
                    ),
                ));
            }
        }
        for layer in &layers {
            if layer.theta.iter().any(|&t| !(t > lif.u_reset)) {
                return Err(Error::argument("theta", "every threshold must exceed u_reset"));
            }
        }
        let n_out = layers.last().expect("non-empty").len();
        Ok(SpikingNetwork {
            lif,
            tau_tr,
            layers,
            projections,
            trace: vec![0.0; n_out],
            trace_time: vec![0.0; n_out],
            target: vec![0.0; n_out],
            time: 0.0,
            rate_cap_khz: DEFAULT_RATE_CAP_KHZ,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.layers.iter().map(LifLayer::len).sum()
    }

    pub fn plastic(&self) -> &Array2<f64> {
        &self.projections.last().expect("non-empty").w
    }

    pub fn plastic_mut(&mut self) -> &mut Array2<f64> {
        &mut self.projections.last_mut().expect("non-empty").w
    }

    /// Trace of output `i` decayed to time `t` (not stored).
    pub fn trace_at(&self, i: usize, t: f64) -> f64 {
        self.trace[i] * (-(t - self.trace_time[i]) / self.tau_tr).exp()
    }

    fn psp_scale(&self) -> f64 {
        self.lif.r / self.lif.tau_m
    }

    fn check_budget(&self, spikes: u64, duration: f64) -> Result<()> {
        let budget = self.rate_cap_khz * duration * self.n_neurons() as f64;
        if spikes as f64 > budget.max(1.0) {
            return Err(Error::RateExplosion {
                spikes,
                duration_ms: duration,
                neurons: self.n_neurons(),
                cap_khz: self.rate_cap_khz,
            });
        }
        Ok(())
    }

    /// Simulates `duration` ms from the current state.
    pub fn run(&mut self, duration: f64, mode: Integration, mut opts: RunOptions) -> Result<RunStats> {
        if !(duration >= 0.0) {
            return Err(Error::argument("duration", "must be nonnegative"));
        }
        let mut stats = RunStats {
            counts: self.layers.iter().map(|l| vec![0; l.len()]).collect(),
            total_spikes: 0,
            abs_dw: 0.0,
            duration,
        };
        match mode {
            Integration::Event => self.run_event(duration, &mut opts, &mut stats)?,
            Integration::Euler { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::argument("dt", format!("Euler step {dt} must be positive")));
                }
                self.run_euler(duration, dt, &mut opts, &mut stats)?
            }
        }
        Ok(stats)
    }

    /// Bookkeeping shared by both integrators when neuron `k` of layer `l`
    /// spikes at `t`. Returns the postsynaptic jumps to deliver.
    fn on_spike(&mut self, l: usize, k: usize, t: f64, opts: &mut RunOptions, stats: &mut RunStats) -> Result<()> {
        stats.counts[l][k] += 1;
        stats.total_spikes += 1;
        self.check_budget(stats.total_spikes, stats.duration)?;
        if let Some(r) = opts.raster.as_deref_mut() {
            r.push(SpikeRecord {
                time: t,
                layer: l,
                neuron: k,
            });
        }
        let last = self.layers.len() - 1;
        if l == last {
            self.trace[k] = self.trace_at(k, t) + 1.0 / self.tau_tr;
            self.trace_time[k] = t;
        } else if l + 1 == last {
            if let Some(alpha) = opts.learning {
                for i in 0..self.trace.len() {
                    let dw = alpha * (self.target[i] - self.trace_at(i, t));
                    self.projections[l].w[[i, k]] += dw;
                    stats.abs_dw += dw.abs();
                }
            }
        }
        Ok(())
    }

    fn postsynaptic(&self, l: usize, k: usize) -> Vec<(usize, f64)> {
        let scale = self.psp_scale();
        let p = &self.projections[l];
        if p.fanout.is_empty() {
            p.w.column(k).iter().enumerate().map(|(i, &w)| (i, w * scale)).collect()
        } else {
            p.fanout[k].iter().map(|&(i, w)| (i, w * scale)).collect()
        }
    }

    fn run_euler(&mut self, duration: f64, dt: f64, opts: &mut RunOptions, stats: &mut RunStats) -> Result<()> {
        let steps = (duration / dt).round() as u64;
        let k = dt / self.lif.tau_m;
        let t0 = self.time;
        let mut pending: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.len()]).collect();
        let mut spiking = Vec::new();
        for s in 1..=steps {
            let t = t0 + s as f64 * dt;
            for l in 0..self.layers.len() {
                spiking.clear();
                {
                    let layer = &mut self.layers[l];
                    let jumps = &mut pending[l];
                    for i in 0..layer.u.len() {
                        if t < layer.last_spike[i] + self.lif.delta_abs {
                            layer.u[i] = self.lif.u_reset;
                            jumps[i] = 0.0;
                            continue;
                        }
                        let u = layer.u[i] + k * (layer.drive[i] - layer.u[i]) + jumps[i];
                        jumps[i] = 0.0;
                        if u >= layer.theta[i] {
                            layer.u[i] = self.lif.u_reset;
                            layer.last_spike[i] = t;
                            spiking.push(i);
                        } else {
                            layer.u[i] = u;
                        }
                    }
                }
                for idx in 0..spiking.len() {
                    let n = spiking[idx];
                    self.on_spike(l, n, t, opts, stats)?;
                    if l + 1 < self.layers.len() {
                        for (i, j) in self.postsynaptic(l, n) {
                            pending[l + 1][i] += j;
                        }
                    }
                }
            }
        }
        self.time = t0 + steps as f64 * dt;
        for layer in &mut self.layers {
            layer.t_state.iter_mut().for_each(|t| *t = self.time);
        }
        Ok(())
    }

    /// Brings neuron `i` of `layer` to time `t` along the exact solution.
    fn advance(lif: &LifParams, layer: &mut LifLayer, i: usize, t: f64) {
        let start = layer.t_state[i].max(layer.last_spike[i] + lif.delta_abs);
        if t > start {
            let d = layer.drive[i];
            layer.u[i] = d + (layer.u[i] - d) * (-(t - start) / lif.tau_m).exp();
        }
        layer.t_state[i] = t;
    }

    /// Next threshold crossing of a neuron whose state is current.
    fn next_crossing(lif: &LifParams, layer: &LifLayer, i: usize) -> Option<f64> {
        let start = layer.t_state[i].max(layer.last_spike[i] + lif.delta_abs);
        let (u, d, theta) = (layer.u[i], layer.drive[i], layer.theta[i]);
        if u >= theta {
            return Some(start);
        }
        if d <= theta {
            return None;
        }
        Some(start + lif.tau_m * ((d - u) / (d - theta)).ln())
    }

    fn run_event(&mut self, duration: f64, opts: &mut RunOptions, stats: &mut RunStats) -> Result<()> {
        let end = self.time + duration;
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.len();
                Some(o)
            })
            .collect();
        let locate = |g: usize| -> (usize, usize) {
            let l = offsets.partition_point(|&o| o <= g) - 1;
            (l, g - offsets[l])
        };
        let mut version = vec![0u32; self.n_neurons()];
        let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for i in 0..layer.len() {
                Self::advance(&self.lif, layer, i, self.time);
                if let Some(tc) = Self::next_crossing(&self.lif, layer, i) {
                    heap.push(Reverse(Event {
                        time: tc,
                        neuron: offsets[l] + i,
                        version: 0,
                    }));
                }
            }
        }
        while let Some(Reverse(ev)) = heap.pop() {
            if ev.time > end {
                break;
            }
            if ev.version != version[ev.neuron] {
                continue;
            }
            let (l, k) = locate(ev.neuron);
            let t = ev.time;
            {
                let layer = &mut self.layers[l];
                layer.u[k] = self.lif.u_reset;
                layer.last_spike[k] = t;
                layer.t_state[k] = t;
            }
            self.on_spike(l, k, t, opts, stats)?;
            version[ev.neuron] += 1;
            if let Some(tc) = Self::next_crossing(&self.lif, &self.layers[l], k) {
                heap.push(Reverse(Event {
                    time: tc,
                    neuron: ev.neuron,
                    version: version[ev.neuron],
                }));
            }
            if l + 1 < self.layers.len() {
                let targets = self.postsynaptic(l, k);
                let post = &mut self.layers[l + 1];
                for (i, jump) in targets {
                    Self::advance(&self.lif, post, i, t);
                    if t < post.last_spike[i] + self.lif.delta_abs {
                        continue;
                    }
                    post.u[i] += jump;
                    let g = offsets[l + 1] + i;
                    version[g] += 1;
                    if let Some(tc) = Self::next_crossing(&self.lif, post, i) {
                        heap.push(Reverse(Event {
                            time: tc,
                            neuron: g,
                            version: version[g],
                        }));
                    }
                }
            }
        }
        self.time = end;
        for layer in &mut self.layers {
            for i in 0..layer.len() {
                Self::advance(&self.lif, layer, i, end);
            }
        }
        Ok(())
    }
}
