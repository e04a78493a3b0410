use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::activation::Activation;
use crate::connectivity::HiddenWeights;
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `½‖tgt − a_L‖²`
    Mse,
    /// `−Σ tgt·log softmax(a_L)`
    Ce,
}

/// One fully connected (optionally masked) layer `a = φ(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
    /// Per-unit input index lists. When set, weights outside a unit's list
    /// are zero and stay zero.
    pub inputs: Option<Vec<Vec<usize>>>,
}

impl Layer {
    /// `W ~ N(0, 1) / (10 sqrt(n_in))`, `b ~ U[0, 1] / 10`.
    pub fn random(n_in: usize, n_out: usize, act: Activation, seed: u64, stream: u64) -> Self {
        let mut rng = seeded_rng(seed, stream);
        let scale = 1.0 / (10.0 * (n_in as f64).sqrt());
        let w = Array2::from_shape_fn((n_out, n_in), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        let b = Array1::from_shape_fn(n_out, |_| rng.random_range(0.0..1.0) / 10.0);
        Layer {
            w,
            b,
            act,
            inputs: None,
        }
    }

    /// ReLU layer from fixed hidden weights, keeping their patch mask.
    pub fn from_hidden(h: &HiddenWeights) -> Self {
        Layer {
            w: h.w.clone(),
            b: h.b.clone(),
            act: Activation::Relu,
            inputs: h.rf.as_ref().map(|rf| rf.index_lists.clone()),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }

    pub fn preactivation(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match &self.inputs {
            Some(lists) => Array1::from_shape_fn(self.n_out(), |i| {
                let row = self.w.row(i);
                lists[i].iter().fold(self.b[i], |acc, &j| acc + row[j] * x[j])
            }),
            None => self.w.dot(&x) + &self.b,
        }
    }

    /// Boolean mask of trainable weights (all true when unmasked).
    pub fn mask(&self) -> Array2<bool> {
        match &self.inputs {
            Some(lists) => {
                let mut m = Array2::from_elem(self.w.dim(), false);
                for (i, list) in lists.iter().enumerate() {
                    for &j in list {
                        m[[i, j]] = true;
                    }
                }
                m
            }
            None => Array2::from_elem(self.w.dim(), true),
        }
    }

    /// `W += α e ⊗ a`, `b += α e`, respecting the mask.
    fn apply(&mut self, alpha: f64, e: &Array1<f64>, a: &Array1<f64>) {
        match &self.inputs {
            Some(lists) => {
                for (i, list) in lists.iter().enumerate() {
                    let s = alpha * e[i];
                    if s == 0.0 {
                        continue;
                    }
                    let mut row = self.w.row_mut(i);
                    for &j in list {
                        row[j] += s * a[j];
                    }
                }
            }
            None => {
                for (i, mut row) in self.w.rows_mut().into_iter().enumerate() {
                    let s = alpha * e[i];
                    if s != 0.0 {
                        row.scaled_add(s, a);
                    }
                }
            }
        }
        self.b.scaled_add(alpha, e);
    }
}

/// Per-layer pre-activations `u[l]` and activations `a[l + 1]`; `a[0]` is
/// the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub u: Vec<Array1<f64>>,
    pub a: Vec<Array1<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array1<f64> {
        self.a.last().expect("input is always present")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateNetwork {
    pub layers: Vec<Layer>,
    pub loss: Loss,
}

/// Weight and bias changes for every layer (zero for frozen layers).
#[derive(Debug, Clone, PartialEq)]
pub struct Deltas {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

/// Fixed random backward matrices; `r[l]` replaces `W_lᵀ` (`n_in × n_out`
/// of layer `l`). `r[0]` is never used.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMatrices {
    pub r: Vec<Array2<f64>>,
}

impl FeedbackMatrices {
    /// Entries `N(0, 1/n_out)` per layer.
    pub fn random(net: &RateNetwork, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0xfa);
        let r = net
            .layers
            .iter()
            .map(|l| {
                let n = Normal::new(0.0, 1.0 / (l.n_out() as f64).sqrt()).expect("finite");
                Array2::from_shape_fn((l.n_in(), l.n_out()), |_| n.sample(&mut rng))
            })
            .collect();
        FeedbackMatrices { r }
    }

    pub fn transposes(net: &RateNetwork) -> Self {
        FeedbackMatrices {
            r: net.layers.iter().map(|l| l.w.t().to_owned()).collect(),
        }
    }
}

/// How errors travel backward.
#[derive(Debug, Clone, Copy)]
pub enum Backward<'a> {
    Transpose,
    Feedback(&'a FeedbackMatrices),
}

pub fn softmax(v: &Array1<f64>) -> Array1<f64> {
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = v.mapv(|x| (x - m).exp());
    let s = e.sum();
    e / s
}

impl RateNetwork {
    pub fn new(layers: Vec<Layer>, loss: Loss) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::argument("layers", "a network needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::argument(
                    "layers",
                    format!(
                        "layer {l} has {} outputs but layer {} takes {} inputs",
                        pair[0].n_out(),
                        l + 1,
                        pair[1].n_in()
                    ),
                ));
            }
        }
        for layer in &layers {
            if layer.b.len() != layer.n_out() {
                return Err(Error::Dimension {
                    what: "bias length",
                    expected: layer.n_out(),
                    actual: layer.b.len(),
                });
            }
        }
        Ok(RateNetwork { layers, loss })
    }

    /// Output activation implied by the loss: ReLU for MSE, linear (fed to
    /// the softmax) for CE.
    pub fn output_activation(loss: Loss) -> Activation {
        match loss {
            Loss::Mse => Activation::Relu,
            Loss::Ce => Activation::Identity,
        }
    }

    /// Single-layer readout (`n_in → n_out`) with default initialization.
    pub fn readout(n_in: usize, n_out: usize, loss: Loss, seed: u64) -> Self {
        let layer = Layer::random(n_in, n_out, Self::output_activation(loss), seed, 0x0e);
        RateNetwork {
            layers: vec![layer],
            loss,
        }
    }

    /// Hidden layer followed by a freshly initialized readout.
    pub fn with_hidden(hidden: Layer, n_out: usize, loss: Loss, seed: u64) -> Self {
        let readout = Layer::random(hidden.n_out(), n_out, Self::output_activation(loss), seed, 0x0e);
        RateNetwork {
            layers: vec![hidden, readout],
            loss,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").n_out()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::argument(
                "x",
                format!("input length {} != network input {}", x.len(), self.input_dim()),
            ));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: ArrayView1<f64>) -> ForwardPass {
        let mut u = Vec::with_capacity(self.layers.len());
        let mut a = Vec::with_capacity(self.layers.len() + 1);
        a.push(x.to_owned());
        for layer in &self.layers {
            let ul = layer.preactivation(a.last().expect("non-empty").view());
            let al = Array1::from_iter(ul.iter().enumerate().map(|(i, &v)| layer.act.apply(i, v)));
            u.push(ul);
            a.push(al);
        }
        ForwardPass { u, a }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.forward_unchecked(x).output().clone()
    }

    pub fn loss_value(&self, pass: &ForwardPass, target: ArrayView1<f64>) -> f64 {
        let out = pass.output();
        match self.loss {
            Loss::Mse => 0.5 * (&target - out).mapv(|v| v * v).sum(),
            Loss::Ce => {
                let p = softmax(out);
                -target.iter().zip(&p).map(|(t, q)| t * q.ln()).sum::<f64>()
            }
        }
    }

    /// `e_L = φ'(u_L) ⊙ ẽ` with `ẽ = tgt − a_L` (MSE) or `tgt − softmax(a_L)`
    /// (CE).
    pub fn output_error(&self, pass: &ForwardPass, target: ArrayView1<f64>) -> Array1<f64> {
        let out = pass.output();
        let raw = match self.loss {
            Loss::Mse => &target - out,
            Loss::Ce => &target - &softmax(out),
        };
        let last = self.layers.last().expect("non-empty");
        let u = pass.u.last().expect("non-empty");
        Array1::from_iter(raw.iter().enumerate().map(|(i, &e)| e * last.act.derivative(i, u[i])))
    }

    /// Errors `e_l` for layers `from..L` (earlier entries are empty).
    pub fn errors(&self, pass: &ForwardPass, target: ArrayView1<f64>, from: usize, backward: Backward) -> Vec<Array1<f64>> {
        let n = self.layers.len();
        let mut e = vec![Array1::zeros(0); n];
        e[n - 1] = self.output_error(pass, target);
        for l in (from + 1..n).rev() {
            let back = match backward {
                Backward::Transpose => self.layers[l].w.t().dot(&e[l]),
                Backward::Feedback(f) => f.r[l].dot(&e[l]),
            };
            let below = &self.layers[l - 1];
            let u = &pass.u[l - 1];
            e[l - 1] = Array1::from_iter(back.iter().enumerate().map(|(i, &v)| v * below.act.derivative(i, u[i])));
        }
        e
    }

    fn deltas_from(&self, pass: &ForwardPass, errors: &[Array1<f64>], from: usize, alpha: f64) -> Deltas {
        let mut dw = Vec::with_capacity(self.layers.len());
        let mut db = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            if l < from {
                dw.push(Array2::zeros(layer.w.dim()));
                db.push(Array1::zeros(layer.n_out()));
                continue;
            }
            let e = &errors[l];
            let a = &pass.a[l];
            let mut w = e.view().insert_axis(Axis(1)).dot(&a.view().insert_axis(Axis(0))) * alpha;
            if layer.inputs.is_some() {
                w.zip_mut_with(&layer.mask(), |v, &m| {
                    if !m {
                        *v = 0.0
                    }
                });
            }
            dw.push(w);
            db.push(e * alpha);
        }
        Deltas { w: dw, b: db }
    }

    /// Delta rule on the last layer only.
    pub fn delta_update(&self, x: ArrayView1<f64>, target: ArrayView1<f64>, alpha: f64) -> Result<Deltas> {
        let pass = self.forward(x)?;
        let from = self.layers.len() - 1;
        let e = self.errors(&pass, target, from, Backward::Transpose);
        Ok(self.deltas_from(&pass, &e, from, alpha))
    }

    /// Backpropagation through every layer.
    pub fn bp_update(&self, x: ArrayView1<f64>, target: ArrayView1<f64>, alpha: f64) -> Result<Deltas> {
        let pass = self.forward(x)?;
        let e = self.errors(&pass, target, 0, Backward::Transpose);
        Ok(self.deltas_from(&pass, &e, 0, alpha))
    }

    /// Feedback alignment: backpropagation with `R_l` in place of `W_lᵀ`.
    pub fn fa_update(
        &self,
        x: ArrayView1<f64>,
        target: ArrayView1<f64>,
        feedback: &FeedbackMatrices,
        alpha: f64,
    ) -> Result<Deltas> {
        self.check_feedback(feedback)?;
        let pass = self.forward(x)?;
        let e = self.errors(&pass, target, 0, Backward::Feedback(feedback));
        Ok(self.deltas_from(&pass, &e, 0, alpha))
    }

    pub fn check_feedback(&self, feedback: &FeedbackMatrices) -> Result<()> {
        if feedback.r.len() != self.layers.len() {
            return Err(Error::Dimension {
                what: "feedback matrices",
                expected: self.layers.len(),
                actual: feedback.r.len(),
            });
        }
        for (l, (r, layer)) in feedback.r.iter().zip(&self.layers).enumerate().skip(1) {
            if r.dim() != (layer.n_in(), layer.n_out()) {
                return Err(Error::argument(
                    "feedback",
                    format!("R_{l} is {:?}, expected {:?}", r.dim(), (layer.n_in(), layer.n_out())),
                ));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, deltas: &Deltas) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(deltas.w.iter().zip(&deltas.b)) {
            layer.w += dw;
            layer.b += db;
        }
    }

    /// One online step updating layers `from..L` in place; returns the loss
    /// before the update.
    pub fn step(&mut self, x: ArrayView1<f64>, target: ArrayView1<f64>, alpha: f64, from: usize, backward: Backward) -> f64 {
        let pass = self.forward_unchecked(x);
        let loss = self.loss_value(&pass, target);
        let e = self.errors(&pass, target, from, backward);
        for l in from..self.layers.len() {
            self.layers[l].apply(alpha, &e[l], &pass.a[l]);
        }
        loss
    }
}
