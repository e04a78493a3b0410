use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    /// Wavelength in pixels.
    pub lambda: f64,
    /// Orientation in radians.
    pub theta: f64,
    /// Phase offset in radians.
    pub psi: f64,
    /// Envelope width in pixels.
    pub sigma: f64,
    /// Envelope aspect ratio.
    pub gamma: f64,
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("sigma", self.sigma), ("gamma", self.gamma)] {
            if !(v > 0.0) {
                return Err(Error::argument("gabor", format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Gabor function at patch-relative coordinates `(x, y)`:
/// a Gaussian envelope in the rotated frame times a cosine carrier along the
/// rotated x axis.
pub fn gabor_value(x: f64, y: f64, g: &GaborParams) -> f64 {
    let (s, c) = g.theta.sin_cos();
    let xr = c * x + s * y;
    let yr = -s * x + c * y;
    let envelope = (-(xr * xr + g.gamma * g.gamma * yr * yr) / (2.0 * g.sigma * g.sigma)).exp();
    envelope * (2.0 * PI * xr / g.lambda + g.psi).cos()
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        if self.hi == self.lo {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

/// Sampling intervals for the five Gabor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborIntervals {
    pub lambda: Interval,
    pub theta: Interval,
    pub psi: Interval,
    pub sigma: Interval,
    pub gamma: Interval,
}

impl GaborIntervals {
    /// Default intervals for patch side `p`. Upper bounds that would fall
    /// below their lower bound for tiny patches are raised to the lower bound.
    pub fn default_for_patch(p: usize) -> Self {
        let p = p as f64;
        GaborIntervals {
            lambda: Interval::new(2.0, p.max(2.0)),
            theta: Interval::new(0.0, PI),
            psi: Interval::new(0.0, 2.0 * PI),
            sigma: Interval::new(1.0, (p / 2.0).max(1.0)),
            gamma: Interval::new(0.5, 1.5),
        }
    }

    pub fn fixed(g: GaborParams) -> Self {
        GaborIntervals {
            lambda: Interval::new(g.lambda, g.lambda),
            theta: Interval::new(g.theta, g.theta),
            psi: Interval::new(g.psi, g.psi),
            sigma: Interval::new(g.sigma, g.sigma),
            gamma: Interval::new(g.gamma, g.gamma),
        }
    }

    fn named(&self) -> [(&'static str, Interval); 5] {
        [
            ("lambda", self.lambda),
            ("theta", self.theta),
            ("psi", self.psi),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in self.named() {
            if !(iv.hi >= iv.lo) {
                return Err(Error::argument(
                    "interval_spec",
                    format!("{name} interval [{}, {}] is empty", iv.lo, iv.hi),
                ));
            }
        }
        for (name, iv) in [("lambda", self.lambda), ("sigma", self.sigma), ("gamma", self.gamma)] {
            if !(iv.lo > 0.0) {
                return Err(Error::argument(
                    "interval_spec",
                    format!("{name} lower bound {} must be positive", iv.lo),
                ));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> GaborParams {
        GaborParams {
            lambda: self.lambda.sample(rng),
            theta: self.theta.sample(rng),
            psi: self.psi.sample(rng),
            sigma: self.sigma.sample(rng),
            gamma: self.gamma.sample(rng),
        }
    }
}

/// Random search over interval bounds. Trial 0 scores `start`; every other
/// trial draws each bound pair uniformly inside a wide envelope around the
/// patch size. Returns the best intervals and their score (higher is
/// better).
pub fn random_search_intervals<F>(
    start: GaborIntervals,
    patch_side: usize,
    trials: usize,
    rng: &mut Rng,
    mut score: F,
) -> Result<(GaborIntervals, f64)>
where
    F: FnMut(&GaborIntervals) -> Result<f64>,
{
    start.validate()?;
    let p = patch_side as f64;
    let mut best = (start, score(&start)?);
    log::info!("gabor search trial 0: score {:.4}", best.1);
    let pair = |lo: f64, hi: f64, rng: &mut Rng| {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        Interval::new(a.min(b), a.max(b))
    };
    for t in 1..trials {
        let cand = GaborIntervals {
            lambda: pair(1.0, 2.0 * p.max(2.0), rng),
            theta: Interval::new(0.0, PI),
            psi: pair(0.0, 2.0 * PI, rng),
            sigma: pair(0.5, p.max(1.0), rng),
            gamma: pair(0.2, 2.0, rng),
        };
        let s = score(&cand)?;
        log::info!("gabor search trial {t}: score {s:.4} for {cand:?}");
        if s > best.1 {
            best = (cand, s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;

    fn params(lambda: f64, theta: f64, psi: f64, sigma: f64, gamma: f64) -> GaborParams {
        GaborParams {
            lambda,
            theta,
            psi,
            sigma,
            gamma,
        }
    }

    #[test]
    fn origin_is_one() {
        assert_eq!(gabor_value(0.0, 0.0, &params(3.0, 0.7, 0.0, 2.0, 0.8)), 1.0);
    }

    #[test]
    fn unrotated_isotropic_depends_on_x_and_radius() {
        let g = params(5.0, 0.0, 0.3, 2.5, 1.0);
        // Same x, same x²+y²: (1, 2) and (1, -2).
        assert_eq!(gabor_value(1.0, 2.0, &g), gabor_value(1.0, -2.0, &g));
        let expect = (-(1.0 + 4.0) / (2.0 * 2.5 * 2.5f64)).exp() * (2.0 * PI / 5.0 + 0.3).cos();
        assert!((gabor_value(1.0, 2.0, &g) - expect).abs() < 1e-15);
    }

    /// Second evaluator: separable envelope factors and the carrier expanded
    /// with the angle-sum identity.
    fn oracle(x: f64, y: f64, lambda: f64, theta: f64, psi: f64, sigma: f64, gamma: f64) -> f64 {
        let xr = x * theta.cos() + y * theta.sin();
        let yr = y * theta.cos() - x * theta.sin();
        let a = 2.0 * PI * xr / lambda;
        let carrier = a.cos() * psi.cos() - a.sin() * psi.sin();
        let two_s2 = 2.0 * sigma * sigma;
        (-xr * xr / two_s2).exp() * (-(gamma * gamma) * yr * yr / two_s2).exp() * carrier
    }

    #[test]
    fn matches_independent_evaluator() {
        let v = gabor_value(1.0, 0.0, &params(4.0, PI / 2.0, 0.0, 2.0, 1.0));
        let o = oracle(1.0, 0.0, 4.0, PI / 2.0, 0.0, 2.0, 1.0);
        assert!((v - o).abs() < 1e-12, "{v} vs {o}");
        // Θ = π/2 maps (1, 0) to x' = 0, y' = -1: envelope e^{-1/8}, carrier cos 0.
        assert!((v - (-0.125f64).exp()).abs() < 1e-12);
        let mut rng = seeded_rng(4, 0);
        for _ in 0..200 {
            let p = GaborIntervals::default_for_patch(10).sample(&mut rng);
            let (x, y) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let a = gabor_value(x, y, &p);
            let b = oracle(x, y, p.lambda, p.theta, p.psi, p.sigma, p.gamma);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_envelope_rotation_invariant() {
        // With γ = 1 the envelope only sees the radius; rotating both the
        // orientation and the sampling point by the same angle leaves the
        // value unchanged.
        let mut rng = seeded_rng(5, 0);
        for _ in 0..100 {
            let base = params(4.0, 0.0, 0.4, 2.0, 1.0);
            let theta = rng.random_range(0.0..PI);
            let (x, y) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let (s, c) = theta.sin_cos();
            let (xs, ys) = (c * x - s * y, s * x + c * y);
            let rotated = GaborParams { theta, ..base };
            assert!((gabor_value(x, y, &base) - gabor_value(xs, ys, &rotated)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_interval_rejected() {
        let mut iv = GaborIntervals::default_for_patch(10);
        iv.sigma = Interval::new(3.0, 2.0);
        assert!(iv.validate().is_err());
        assert!(GaborIntervals::default_for_patch(1).validate().is_ok());
    }

    #[test]
    fn search_keeps_best() {
        let mut rng = seeded_rng(0, 0);
        let start = GaborIntervals::default_for_patch(10);
        let (best, s) = random_search_intervals(start, 10, 20, &mut rng, |iv| Ok(-iv.gamma.hi)).unwrap();
        assert!(s >= -1.5);
        assert_eq!(s, -best.gamma.hi);
    }
}
