use std::sync::Arc;

/// Firing rate (kHz) of a LIF neuron driven by constant `u = R·I` (mV):
/// `[Δ_abs − τ_m ln(1 − ϑ/u)]⁻¹` above threshold, 0 otherwise.
pub fn lif_rate(u: f64, theta: f64, tau_m: f64, delta_abs: f64) -> f64 {
    if u <= theta {
        return 0.0;
    }
    1.0 / (delta_abs - tau_m * (-theta / u).ln_1p())
}

/// `dφ_LIF/du`.
pub fn lif_rate_derivative(u: f64, theta: f64, tau_m: f64, delta_abs: f64) -> f64 {
    if u <= theta {
        return 0.0;
    }
    let r = lif_rate(u, theta, tau_m, delta_abs);
    tau_m * theta / (u * (u - theta)) * r * r
}

/// LIF rate nonlinearity with per-neuron thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct LifRate {
    pub thresholds: Vec<f64>,
    pub tau_m: f64,
    pub delta_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Relu,
    Identity,
    Lif(Arc<LifRate>),
}

impl Activation {
    pub fn apply(&self, unit: usize, u: f64) -> f64 {
        match self {
            Activation::Relu => u.max(0.0),
            Activation::Identity => u,
            Activation::Lif(l) => lif_rate(u, l.thresholds[unit], l.tau_m, l.delta_abs),
        }
    }

    /// Derivative; ReLU uses 0 at the kink.
    pub fn derivative(&self, unit: usize, u: f64) -> f64 {
        match self {
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Lif(l) => lif_rate_derivative(u, l.thresholds[unit], l.tau_m, l.delta_abs),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Lif(_) => "lif",
        }
    }
}
