use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::checkpoint::{format_key_values, parse_key_values};
use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::ratenet::Loss;
use crate::spiking::{Integration, LifParams, Protocol};
use crate::unsup::{FitOptions, IcaOptions, ScParams, UnsupMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Single-layer perceptron on raw pixels.
    Sp,
    Rp,
    Rg,
    Pca,
    Ica,
    Sc,
    Bp,
    Fa,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sp,
        Method::Rp,
        Method::Rg,
        Method::Pca,
        Method::Ica,
        Method::Sc,
        Method::Bp,
        Method::Fa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sp => "sp",
            Method::Rp => "rp",
            Method::Rg => "rg",
            Method::Pca => "pca",
            Method::Ica => "ica",
            Method::Sc => "sc",
            Method::Bp => "bp",
            Method::Fa => "fa",
        }
    }

    pub fn unsup(&self) -> Option<UnsupMethod> {
        match self {
            Method::Pca => Some(UnsupMethod::Pca),
            Method::Ica => Some(UnsupMethod::Ica),
            Method::Sc => Some(UnsupMethod::Sc),
            _ => None,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Full,
    Localized,
}

impl Scope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::Full => "full",
            Scope::Localized => "localized",
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scope::Full),
            "localized" | "local" => Ok(Scope::Localized),
            other => Err(Error::config("scope", format!("unknown scope `{other}`"))),
        }
    }
}

/// One experiment, as flat `key = value` pairs. Defaults follow the
/// reference parameter tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// Block-average images to `downsample × downsample` (0 keeps them).
    pub downsample: usize,
    pub method: Method,
    pub scope: Scope,
    pub n_h: usize,
    pub p: usize,
    pub n_pop: usize,
    /// Variance constant of localized Gaussian weights.
    pub c: f64,
    pub alpha: f64,
    pub loss: Loss,
    pub iterations: u64,
    pub seed: u64,
    pub eval_every: u64,
    /// 0 evaluates the training accuracy on the whole training set.
    pub train_eval_limit: usize,
    /// 0 evaluates on the whole test set.
    pub test_limit: usize,
    /// Encoded features are cached in memory up to this many MiB.
    pub feature_budget_mb: usize,
    pub max_samples: usize,
    pub ica_max_iter: usize,
    pub ica_tol: f64,
    pub sc: ScParams,

    pub spiking: bool,
    pub lif: LifParams,
    pub protocol: Protocol,
    pub tau_tr: f64,
    pub stdp_alpha: f64,
    pub presentations: u64,
    /// Euler step in ms; 0 selects exact event-driven integration.
    pub dt: f64,
    pub rate_cap_khz: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetKind::Mnist,
            downsample: 0,
            method: Method::Rp,
            scope: Scope::Localized,
            n_h: 5000,
            p: 10,
            n_pop: 500,
            c: crate::connectivity::DEFAULT_VARIANCE_CONSTANT,
            alpha: 1e-3,
            loss: Loss::Mse,
            iterations: 10_000_000,
            seed: 0,
            eval_every: 100_000,
            train_eval_limit: 10_000,
            test_limit: 0,
            feature_budget_mb: 2048,
            max_samples: 0,
            ica_max_iter: IcaOptions::default().max_iter,
            ica_tol: IcaOptions::default().tol,
            sc: ScParams::default(),
            spiking: false,
            lif: LifParams::default(),
            protocol: Protocol::default(),
            tau_tr: crate::spiking::DEFAULT_TAU_TR,
            stdp_alpha: 2e-4,
            presentations: 6_000_000,
            dt: 0.0,
            rate_cap_khz: crate::spiking::DEFAULT_RATE_CAP_KHZ,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

/// Accepts `1e7`-style literals for counts.
fn parse_count(key: &str, value: &str) -> Result<u64> {
    if let Ok(v) = value.trim().parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = parse(key, value)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(Error::config(key, format!("`{value}` is not a nonnegative integer")))
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("`{value}` is not a boolean"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 45] = [
        "dataset",
        "downsample",
        "method",
        "scope",
        "n_h",
        "p",
        "n_pop",
        "c",
        "alpha",
        "loss",
        "iterations",
        "seed",
        "eval_every",
        "train_eval_limit",
        "test_limit",
        "feature_budget_mb",
        "max_samples",
        "ica_max_iter",
        "ica_tol",
        "sc_lambda",
        "sc_alpha_w",
        "sc_alpha_v",
        "sc_step",
        "sc_n_iter",
        "sc_tau_mav",
        "sc_presentations",
        "spiking",
        "tau_m",
        "r",
        "delta_abs",
        "theta_mean",
        "theta_std",
        "u_reset",
        "tau_tr",
        "amp_inp",
        "amp_tgt",
        "i_bias",
        "t_trans",
        "t_pat_train",
        "t_pat_test",
        "target_delay",
        "stdp_alpha",
        "presentations",
        "dt",
        "rate_cap_khz",
    ];

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "dataset" => self.dataset = v.trim().parse()?,
            "downsample" => self.downsample = parse(key, v)?,
            "method" => self.method = v.trim().parse()?,
            "scope" => self.scope = v.trim().parse()?,
            "n_h" => self.n_h = parse_count(key, v)? as usize,
            "p" => self.p = parse(key, v)?,
            "n_pop" => self.n_pop = parse(key, v)?,
            "c" => self.c = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "loss" => {
                self.loss = match v.trim().to_ascii_lowercase().as_str() {
                    "mse" => Loss::Mse,
                    "ce" => Loss::Ce,
                    other => return Err(Error::config(key, format!("unknown loss `{other}`"))),
                }
            }
            "iterations" => self.iterations = parse_count(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "eval_every" => self.eval_every = parse_count(key, v)?,
            "train_eval_limit" => self.train_eval_limit = parse_count(key, v)? as usize,
            "test_limit" => self.test_limit = parse_count(key, v)? as usize,
            "feature_budget_mb" => self.feature_budget_mb = parse(key, v)?,
            "max_samples" => self.max_samples = parse_count(key, v)? as usize,
            "ica_max_iter" => self.ica_max_iter = parse(key, v)?,
            "ica_tol" => self.ica_tol = parse(key, v)?,
            "sc_lambda" => self.sc.lambda = parse(key, v)?,
            "sc_alpha_w" => self.sc.alpha_w = parse(key, v)?,
            "sc_alpha_v" => self.sc.alpha_v = parse(key, v)?,
            "sc_step" => self.sc.step = parse(key, v)?,
            "sc_n_iter" => self.sc.n_iter = parse(key, v)?,
            "sc_tau_mav" => self.sc.tau_mav = parse(key, v)?,
            "sc_presentations" => self.sc.presentations = parse_count(key, v)?,
            "spiking" => self.spiking = parse_bool(key, v)?,
            "tau_m" => self.lif.tau_m = parse(key, v)?,
            "r" => self.lif.r = parse(key, v)?,
            "delta_abs" => self.lif.delta_abs = parse(key, v)?,
            "theta_mean" => self.lif.theta_mean = parse(key, v)?,
            "theta_std" => self.lif.theta_std = parse(key, v)?,
            "u_reset" => self.lif.u_reset = parse(key, v)?,
            "tau_tr" => self.tau_tr = parse(key, v)?,
            "amp_inp" => self.protocol.amp_inp = parse(key, v)?,
            "amp_tgt" => self.protocol.amp_tgt = parse(key, v)?,
            "i_bias" => self.protocol.i_bias = parse(key, v)?,
            "t_trans" => self.protocol.t_trans = parse(key, v)?,
            "t_pat_train" => self.protocol.t_pat_train = parse(key, v)?,
            "t_pat_test" => self.protocol.t_pat_test = parse(key, v)?,
            "target_delay" => self.protocol.target_delay = parse(key, v)?,
            "stdp_alpha" => self.stdp_alpha = parse(key, v)?,
            "presentations" => self.presentations = parse_count(key, v)?,
            "dt" => self.dt = parse(key, v)?,
            "rate_cap_khz" => self.rate_cap_khz = parse(key, v)?,
            other => return Err(Error::config(other, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "dataset" => self.dataset.to_string(),
            "downsample" => self.downsample.to_string(),
            "method" => self.method.to_string(),
            "scope" => self.scope.as_str().to_string(),
            "n_h" => self.n_h.to_string(),
            "p" => self.p.to_string(),
            "n_pop" => self.n_pop.to_string(),
            "c" => self.c.to_string(),
            "alpha" => self.alpha.to_string(),
            "loss" => match self.loss {
                Loss::Mse => "mse".into(),
                Loss::Ce => "ce".into(),
            },
            "iterations" => self.iterations.to_string(),
            "seed" => self.seed.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "train_eval_limit" => self.train_eval_limit.to_string(),
            "test_limit" => self.test_limit.to_string(),
            "feature_budget_mb" => self.feature_budget_mb.to_string(),
            "max_samples" => self.max_samples.to_string(),
            "ica_max_iter" => self.ica_max_iter.to_string(),
            "ica_tol" => self.ica_tol.to_string(),
            "sc_lambda" => self.sc.lambda.to_string(),
            "sc_alpha_w" => self.sc.alpha_w.to_string(),
            "sc_alpha_v" => self.sc.alpha_v.to_string(),
            "sc_step" => self.sc.step.to_string(),
            "sc_n_iter" => self.sc.n_iter.to_string(),
            "sc_tau_mav" => self.sc.tau_mav.to_string(),
            "sc_presentations" => self.sc.presentations.to_string(),
            "spiking" => self.spiking.to_string(),
            "tau_m" => self.lif.tau_m.to_string(),
            "r" => self.lif.r.to_string(),
            "delta_abs" => self.lif.delta_abs.to_string(),
            "theta_mean" => self.lif.theta_mean.to_string(),
            "theta_std" => self.lif.theta_std.to_string(),
            "u_reset" => self.lif.u_reset.to_string(),
            "tau_tr" => self.tau_tr.to_string(),
            "amp_inp" => self.protocol.amp_inp.to_string(),
            "amp_tgt" => self.protocol.amp_tgt.to_string(),
            "i_bias" => self.protocol.i_bias.to_string(),
            "t_trans" => self.protocol.t_trans.to_string(),
            "t_pat_train" => self.protocol.t_pat_train.to_string(),
            "t_pat_test" => self.protocol.t_pat_test.to_string(),
            "target_delay" => self.protocol.target_delay.to_string(),
            "stdp_alpha" => self.stdp_alpha.to_string(),
            "presentations" => self.presentations.to_string(),
            "dt" => self.dt.to_string(),
            "rate_cap_khz" => self.rate_cap_khz.to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        Self::KEYS
            .iter()
            .map(|&k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        format_key_values(self.to_pairs().iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Applies `--key value` (or `--key=value`) overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, args: &[S]) -> Result<()> {
        let mut i = 0;
        while i < args.len() {
            let arg = args[i].as_ref();
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(Error::config(arg, "expected `--key value`"));
            };
            let key = flag.replace('-', "_");
            if let Some((k, v)) = key.split_once('=') {
                self.set(k, v)?;
                i += 1;
            } else {
                let v = args
                    .get(i + 1)
                    .ok_or_else(|| Error::config(key.clone(), "missing value"))?;
                self.set(&key, v.as_ref())?;
                i += 2;
            }
        }
        Ok(())
    }

    pub fn image_side(&self) -> usize {
        if self.downsample > 0 {
            self.downsample
        } else {
            self.dataset.dims().height
        }
    }

    pub fn input_dim(&self) -> usize {
        let side = self.image_side();
        side * side * self.dataset.dims().channels
    }

    /// Series label used in sweeps, e.g. `l-rp` or `sc`.
    pub fn label(&self) -> String {
        let prefix = match (self.method, self.scope) {
            (Method::Sp, _) => "",
            (_, Scope::Localized) => "l-",
            (_, Scope::Full) => "",
        };
        let spk = if self.spiking { "spiking-" } else { "" };
        format!("{spk}{prefix}{}", self.method)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            ica: IcaOptions {
                max_iter: self.ica_max_iter,
                tol: self.ica_tol,
                seed: self.seed,
            },
            sc: self.sc,
            max_samples: self.max_samples,
            seed: self.seed,
        }
    }

    pub fn integration(&self) -> Integration {
        if self.dt > 0.0 {
            Integration::Euler { dt: self.dt }
        } else {
            Integration::Event
        }
    }

    /// Rejects inconsistent settings, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let side = self.image_side();
        let d = self.input_dim();
        if self.downsample > self.dataset.dims().height {
            return Err(Error::config("downsample", "cannot upsample images"));
        }
        if self.method != Method::Sp && self.n_h == 0 {
            return Err(Error::config("n_h", "must be positive"));
        }
        let localized = self.scope == Scope::Localized && self.method != Method::Sp;
        if localized && !(1..=side).contains(&self.p) {
            return Err(Error::config("p", format!("patch side {} must be in 1..={side}", self.p)));
        }
        if matches!(self.method, Method::Pca | Method::Ica) && self.scope == Scope::Full && self.n_h > d {
            return Err(Error::config(
                "n_h",
                format!("global {} yields at most d = {d} components, got {}", self.method, self.n_h),
            ));
        }
        if let Some(_m) = self.method.unsup() {
            if self.scope == Scope::Localized {
                if self.n_pop == 0 {
                    return Err(Error::config("n_pop", "must be positive"));
                }
                if self.n_h < self.n_pop {
                    return Err(Error::config("n_h", format!("{} is below n_pop = {}", self.n_h, self.n_pop)));
                }
                let per_pop = self.n_h.div_ceil(self.n_pop);
                let patch = self.p * self.p * self.dataset.dims().channels;
                if matches!(self.method, Method::Pca | Method::Ica) && per_pop > patch {
                    return Err(Error::config(
                        "n_pop",
                        format!("{per_pop} units per population exceed the patch dimension {patch}"),
                    ));
                }
            }
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config("alpha", "must be positive and finite"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("c", "must be positive"));
        }
        if !(self.dt >= 0.0) {
            return Err(Error::config("dt", "must be nonnegative"));
        }
        if !(self.stdp_alpha >= 0.0) {
            return Err(Error::config("stdp_alpha", "must be nonnegative"));
        }
        if !(self.rate_cap_khz > 0.0) {
            return Err(Error::config("rate_cap_khz", "must be positive"));
        }
        if self.spiking {
            if !matches!(self.method, Method::Rp | Method::Rg) {
                return Err(Error::config("method", "spiking networks use rp or rg hidden layers"));
            }
            self.lif.validate()?;
            self.protocol.validate()?;
            if !(self.tau_tr > 0.0) {
                return Err(Error::config("tau_tr", "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig {
            method: Method::Sc,
            dt: 0.05,
            ..ExperimentConfig::default()
        };
        cfg.sc.lambda = 0.02;
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_and_scientific_counts() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&["--method", "sp", "--iterations", "1e6", "--n-h=200"]).unwrap();
        assert_eq!(cfg.method, Method::Sp);
        assert_eq!(cfg.iterations, 1_000_000);
        assert_eq!(cfg.n_h, 200);
        assert_eq!(field_of(cfg.apply_overrides(&["--bogus", "1"]).unwrap_err()), "bogus");
        assert_eq!(field_of(cfg.apply_overrides(&["--alpha"]).unwrap_err()), "alpha");
        assert_eq!(field_of(cfg.apply_overrides(&["--iterations", "1.5"]).unwrap_err()), "iterations");
    }

    #[test]
    fn validation_names_fields() {
        let bad = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            field_of(c.validate().unwrap_err())
        };
        assert!(ExperimentConfig::default().validate().is_ok());
        assert_eq!(
            bad(&|c| {
                c.method = Method::Pca;
                c.scope = Scope::Full;
                c.n_h = 785;
            }),
            "n_h"
        );
        assert_eq!(bad(&|c| c.p = 0), "p");
        assert_eq!(bad(&|c| c.p = 29), "p");
        assert_eq!(
            bad(&|c| {
                c.method = Method::Sc;
                c.n_h = 100;
            }),
            "n_h"
        );
        assert_eq!(bad(&|c| c.alpha = 0.0), "alpha");
        assert_eq!(
            bad(&|c| {
                c.spiking = true;
                c.method = Method::Pca;
            }),
            "method"
        );
        assert_eq!(
            bad(&|c| {
                c.spiking = true;
                c.lif.tau_m = -1.0;
            }),
            "tau_m"
        );
    }

    #[test]
    fn every_key_round_trips_through_get() {
        let cfg = ExperimentConfig::default();
        for k in ExperimentConfig::KEYS {
            let mut other = ExperimentConfig::default();
            other.set(k, &cfg.get(k).unwrap()).unwrap();
            assert_eq!(other, cfg, "{k}");
        }
    }
}
