//! Sparse coding with feedforward Hebbian learning and learned recurrent
//! inhibition.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use rand_distr::{Distribution, StandardNormal};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScParams {
    pub lambda: f64,
    pub alpha_w: f64,
    pub alpha_v: f64,
    /// Euler step of the inner dynamics, `Δt / τ_u`.
    pub step: f64,
    pub n_iter: usize,
    /// Moving-average time constant in presentations.
    pub tau_mav: f64,
    pub presentations: u64,
}

impl Default for ScParams {
    fn default() -> Self {
        ScParams {
            lambda: 1e-2,
            alpha_w: 1e-3,
            alpha_v: 1e-2,
            step: 0.1,
            n_iter: 50,
            tau_mav: 100.0,
            presentations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoder {
    /// `n_h × d`, unit-norm rows.
    pub w: Array2<f64>,
    /// `n_h × n_h`, nonnegative with zero diagonal.
    pub v: Array2<f64>,
    pub a_mav: Array1<f64>,
    pub params: ScParams,
    /// Presentations seen so far (drives the moving-average ramp).
    pub seen: u64,
}

/// Result of relaxing the recurrent dynamics for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub a: Array1<f64>,
    /// `‖a_N − a_{N−1}‖ / ‖a_N‖` (0 when both vanish).
    pub delta: f64,
}

fn normalize_rows(w: &mut Array2<f64>) {
    for mut row in w.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row.mapv_inplace(|v| v / n);
        }
    }
}

impl SparseCoder {
    /// `W ~ N(0, 1) / (10 sqrt(d))` with rows normalized, `V = 0`.
    pub fn new(n_h: usize, d: usize, params: ScParams, seed: u64) -> Result<Self> {
        if n_h == 0 || d == 0 {
            return Err(Error::argument("n_h", "sparse coder needs n_h > 0 and d > 0"));
        }
        let mut rng = seeded_rng(seed, 0x5c);
        let scale = 1.0 / (10.0 * (d as f64).sqrt());
        let mut w = Array2::from_shape_fn((n_h, d), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        normalize_rows(&mut w);
        Ok(SparseCoder {
            w,
            v: Array2::zeros((n_h, n_h)),
            a_mav: Array1::zeros(n_h),
            params,
            seen: 0,
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.w.nrows()
    }

    /// Relaxes `u ← u + step·(−u + W x − V a)`, `a = ReLU(u − λ)` from rest.
    pub fn infer(&self, x: ArrayView1<f64>, n_iter: usize) -> Inference {
        let n = self.n_hidden();
        let drive = self.w.dot(&x);
        let (step, lambda) = (self.params.step, self.params.lambda);
        let mut u = Array1::<f64>::zeros(n);
        let mut a = Array1::<f64>::zeros(n);
        let mut prev = a.clone();
        let mut active: Vec<usize> = Vec::new();
        let mut inhibition = vec![0.0; n];
        for _ in 0..n_iter {
            inhibition.iter_mut().for_each(|v| *v = 0.0);
            for &k in &active {
                let ak = a[k];
                for (j, inh) in inhibition.iter_mut().enumerate() {
                    *inh += self.v[[j, k]] * ak;
                }
            }
            prev.assign(&a);
            active.clear();
            for j in 0..n {
                u[j] += step * (-u[j] + drive[j] - inhibition[j]);
                let aj = u[j] - lambda;
                if aj > 0.0 {
                    a[j] = aj;
                    active.push(j);
                } else {
                    a[j] = 0.0;
                }
            }
        }
        let norm = a.dot(&a).sqrt();
        let diff = (&a - &prev).mapv(|v| v * v).sum().sqrt();
        let delta = if norm > 0.0 {
            diff / norm
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Inference { a, delta }
    }

    /// One Hebbian step for input `x` with relaxed activity `a`.
    pub fn update(&mut self, x: ArrayView1<f64>, a: ArrayView1<f64>) -> Result<()> {
        let n = self.n_hidden();
        if x.len() != self.w.ncols() {
            return Err(Error::argument("x", format!("length {} != input dim {}", x.len(), self.w.ncols())));
        }
        if a.len() != n {
            return Err(Error::argument("a", format!("length {} != n_h {n}", a.len())));
        }
        self.seen += 1;
        let tau = (self.seen as f64).min(self.params.tau_mav).max(1.0);
        self.a_mav.zip_mut_with(&a, |m, &ai| *m += (ai - *m) / tau);

        let active: Vec<usize> = (0..n).filter(|&j| a[j] != 0.0).collect();
        if active.is_empty() {
            return Ok(());
        }
        // ΔW_ji = α_w a_j x_i, then renormalize the touched rows.
        for &j in &active {
            let mut row = self.w.row_mut(j);
            row.scaled_add(self.params.alpha_w * a[j], &x);
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        // ΔV_jk = α_v a_k (a_j − ⟨a_j⟩), clamped at 0 with an empty diagonal.
        for j in 0..n {
            let dev = a[j] - self.a_mav[j];
            if dev == 0.0 {
                continue;
            }
            let mut row = self.v.row_mut(j);
            for &k in &active {
                if k != j {
                    row[k] = (row[k] + self.params.alpha_v * a[k] * dev).max(0.0);
                }
            }
        }
        Ok(())
    }

    /// `½‖x − Wᵀa‖² + λ‖a‖₁`.
    pub fn energy(&self, x: ArrayView1<f64>, a: ArrayView1<f64>) -> f64 {
        let residual = &x - &self.w.t().dot(&a);
        0.5 * residual.dot(&residual) + self.params.lambda * a.iter().map(|v| v.abs()).sum::<f64>()
    }
}

impl Encoder for SparseCoder {
    fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    fn encode_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        out.assign(&self.infer(x, self.params.n_iter).a);
    }
}

/// Alternates inference and Hebbian updates for `params.presentations`
/// samples drawn by `order`.
pub fn fit_sc(
    data: ArrayView2<f64>,
    n_h: usize,
    params: ScParams,
    seed: u64,
    order: impl IntoIterator<Item = usize>,
) -> Result<SparseCoder> {
    let mut coder = SparseCoder::new(n_h, data.ncols(), params, seed)?;
    for i in order.into_iter().take(params.presentations as usize) {
        let x = data.row(i);
        let inf = coder.infer(x, params.n_iter);
        coder.update(x, inf.a.view())?;
    }
    Ok(coder)
}

/// Fraction of exactly-zero activations over the given samples.
pub fn sparsity<E: Encoder + ?Sized>(encoder: &E, samples: ArrayView2<f64>) -> f64 {
    let mut zeros = 0usize;
    let mut out = Array1::zeros(encoder.output_dim());
    for x in samples.rows() {
        encoder.encode_into(x, out.view_mut());
        zeros += out.iter().filter(|&&v| v == 0.0).count();
    }
    zeros as f64 / (samples.nrows() * encoder.output_dim()).max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn toy(n_h: usize, d: usize, seed: u64) -> SparseCoder {
        SparseCoder::new(n_h, d, ScParams::default(), seed).unwrap()
    }

    #[test]
    fn one_unit_step_without_recurrence() {
        let mut c = toy(6, 4, 0);
        c.params.step = 1.0;
        let x = ndarray::array![0.3, -0.2, 0.8, 0.1];
        let a = c.infer(x.view(), 1).a;
        let expect = c.w.dot(&x).mapv(|v| (v - c.params.lambda).max(0.0));
        assert_eq!(a, expect);
    }

    #[test]
    fn zero_input_stays_silent() {
        let mut c = toy(5, 3, 1);
        c.v.fill(0.2);
        c.v.diag_mut().fill(0.0);
        let inf = c.infer(Array1::zeros(3).view(), 50);
        assert!(inf.a.iter().all(|&v| v == 0.0));
        assert_eq!(inf.delta, 0.0);
    }

    /// Fixed point `u = Wx − Va`, `a = ReLU(u − λ)` by damped iteration
    /// run to 1e-10.
    fn fixed_point(c: &SparseCoder, x: ArrayView1<f64>) -> Array1<f64> {
        let drive = c.w.dot(&x);
        let mut u = Array1::<f64>::zeros(c.n_hidden());
        for _ in 0..100_000 {
            let a = u.mapv(|v| (v - c.params.lambda).max(0.0));
            let target = &drive - &c.v.dot(&a);
            let next = &u * 0.7 + &target * 0.3;
            let change = (&next - &u).mapv(f64::abs).sum();
            u = next;
            if change < 1e-12 {
                break;
            }
        }
        u.mapv(|v| (v - c.params.lambda).max(0.0))
    }

    #[test]
    fn relaxation_matches_fixed_point_solver() {
        let mut c = toy(5, 8, 2);
        let mut rng = seeded_rng(9, 0);
        for j in 0..5 {
            for k in 0..5 {
                if j != k {
                    c.v[[j, k]] = rng.random_range(0.0..0.3);
                }
            }
        }
        let x = Array1::from_shape_fn(8, |_| rng.random_range(-1.0..1.0));
        let direct = fixed_point(&c, x.view());
        let relaxed = c.infer(x.view(), 400).a;
        let err = (&relaxed - &direct).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        assert!(err < 1e-8, "max deviation {err}");
    }

    #[test]
    fn zero_activity_leaves_weights() {
        let mut c = toy(4, 3, 3);
        let (w, v) = (c.w.clone(), c.v.clone());
        c.update(ndarray::array![1.0, 2.0, 3.0].view(), Array1::zeros(4).view()).unwrap();
        assert_eq!(c.w, w);
        assert_eq!(c.v, v);
    }

    #[test]
    fn update_preserves_invariants() {
        let mut rng = seeded_rng(4, 0);
        let data = Array2::from_shape_fn((50, 12), |_| rng.random_range(-1.0..1.0));
        let mut c = toy(8, 12, 4);
        for x in data.rows() {
            let inf = c.infer(x, 50);
            c.update(x, inf.a.view()).unwrap();
            for row in c.w.rows() {
                assert!((row.dot(&row) - 1.0).abs() < 1e-12);
            }
            assert!(c.v.iter().all(|&v| v >= 0.0));
            assert!(c.v.diag().iter().all(|&v| v == 0.0));
        }
        assert!(c.v.sum() > 0.0);
    }

    #[test]
    fn dimension_errors() {
        let mut c = toy(4, 3, 5);
        assert!(c.update(Array1::zeros(2).view(), Array1::zeros(4).view()).is_err());
        assert!(c.update(Array1::zeros(3).view(), Array1::zeros(5).view()).is_err());
    }

    #[test]
    fn zero_presentations_and_determinism() {
        let mut rng = seeded_rng(6, 0);
        let data = Array2::from_shape_fn((30, 10), |_| rng.random_range(-1.0..1.0));
        let p0 = ScParams {
            presentations: 0,
            ..ScParams::default()
        };
        let untouched = fit_sc(data.view(), 6, p0, 7, 0..30).unwrap();
        let init = toy(6, 10, 7);
        assert_eq!((untouched.w, untouched.v), (init.w, init.v));
        let p = ScParams {
            presentations: 60,
            ..ScParams::default()
        };
        let a = fit_sc(data.view(), 6, p, 7, (0..60).map(|i| i % 30)).unwrap();
        let b = fit_sc(data.view(), 6, p, 7, (0..60).map(|i| i % 30)).unwrap();
        assert_eq!(a, b);
    }
}
