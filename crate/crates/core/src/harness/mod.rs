//! Experiment configuration, dispatch, sweeps and plot-data emission.

mod config;
mod sweep;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Method, Scope};
pub use sweep::{
    aggregate, emit_plotdata, nearest_rank, read_sweep_csv, sweep, write_sweep_csv, Band, SweepAxis, SweepPoint,
};

use crate::checkpoint::{self, Tensor};
use crate::connectivity::{
    init_gabor_full, init_gabor_localized, init_random_full, init_random_localized, GaborIntervals, HiddenWeights,
};
use crate::datasets::{downsample, preprocess_pair, Dataset, Split};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::ratenet::{
    self, effective_alpha, evaluate, train, Algorithm, CachedSource, FeedbackMatrices, Features, Layer, RateNetwork,
    TrainSpec,
};
use crate::record::RunRecord;
use crate::spiking::{self, classify_spiking, train_spiking, SpikingDiagnostics, SpikingNetwork, SpikingTrainSpec};
use crate::unsup::{fit_global, fit_localized, PopulationPartition, UnsupEncoder};

/// Environment variable overriding the data directory.
pub const DATA_DIR_ENV: &str = "SHALLOWNET_DATA_DIR";

/// `$SHALLOWNET_DATA_DIR`, else `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Loads, optionally downsamples, and centers the train/test splits.
pub fn load_data(cfg: &ExperimentConfig, dir: &Path) -> Result<(Dataset, Dataset)> {
    let mut train = cfg.dataset.load(dir, Split::Train)?;
    let mut test = cfg.dataset.load(dir, Split::Test)?;
    if cfg.downsample > 0 {
        train = downsample(&train, cfg.downsample)?;
        test = downsample(&test, cfg.downsample)?;
    }
    preprocess_pair(&train, &test)
}

/// Hidden layer feeding the readout.
#[derive(Debug, Clone, PartialEq)]
pub enum Hidden {
    /// No hidden layer, or one trained as part of the network.
    None,
    Fixed(HiddenWeights),
    Unsup(UnsupEncoder),
}

impl Hidden {
    pub fn encoder(&self) -> Option<&dyn Encoder> {
        match self {
            Hidden::None => None,
            Hidden::Fixed(h) => Some(h),
            Hidden::Unsup(u) => Some(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Rate { hidden: Hidden, net: RateNetwork },
    Spiking(SpikingNetwork),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub model: Model,
    pub diagnostics: Option<SpikingDiagnostics>,
}

fn initial_hidden(cfg: &ExperimentConfig, data: &Dataset) -> Result<HiddenWeights> {
    let dims = data.dims;
    let d = dims.input_dim();
    match (cfg.method, cfg.scope) {
        (Method::Rg, Scope::Full) => {
            init_gabor_full(cfg.n_h, dims, &GaborIntervals::default_for_patch(dims.height), cfg.seed)
        }
        (Method::Rg, Scope::Localized) => init_gabor_localized(
            cfg.n_h,
            dims,
            cfg.p,
            &GaborIntervals::default_for_patch(cfg.p),
            cfg.c,
            cfg.seed,
        ),
        (_, Scope::Full) => init_random_full(cfg.n_h, d, cfg.seed),
        (_, Scope::Localized) => init_random_localized(cfg.n_h, dims, cfg.p, cfg.c, cfg.seed),
    }
}

/// Fits the unsupervised encoder described by `cfg` on `train`.
pub fn fit_encoder(cfg: &ExperimentConfig, train: &Dataset) -> Result<UnsupEncoder> {
    let method = cfg
        .method
        .unsup()
        .ok_or_else(|| Error::config("method", format!("`{}` has no unsupervised encoder", cfg.method)))?;
    cfg.validate()?;
    let opts = cfg.fit_options();
    match cfg.scope {
        Scope::Full => fit_global(train.vectors.view(), method, cfg.n_h, opts).map(UnsupEncoder::Global),
        Scope::Localized => {
            let partition = PopulationPartition::random(cfg.n_h, cfg.n_pop, train.dims, cfg.p, cfg.seed)?;
            fit_localized(train.vectors.view(), method, partition, opts).map(UnsupEncoder::Localized)
        }
    }
}

/// Untrained model for `cfg`. Unsupervised encoders are fitted on `train`
/// unless `encoder` supplies one.
pub fn build_model(cfg: &ExperimentConfig, train: &Dataset, encoder: Option<UnsupEncoder>) -> Result<Model> {
    cfg.validate()?;
    if train.input_dim() != cfg.input_dim() {
        return Err(Error::Dimension {
            what: "dataset input",
            expected: cfg.input_dim(),
            actual: train.input_dim(),
        });
    }
    if cfg.spiking {
        let h = initial_hidden(cfg, train)?;
        let mut net = spiking::from_hidden(&h, 10, cfg.lif, cfg.tau_tr, cfg.seed)?;
        net.rate_cap_khz = cfg.rate_cap_khz;
        return Ok(Model::Spiking(net));
    }
    let d = train.input_dim();
    let (hidden, net) = match cfg.method {
        Method::Sp => (Hidden::None, RateNetwork::readout(d, 10, cfg.loss, cfg.seed)),
        Method::Rp | Method::Rg => {
            let h = initial_hidden(cfg, train)?;
            (Hidden::Fixed(h), RateNetwork::readout(cfg.n_h, 10, cfg.loss, cfg.seed))
        }
        Method::Pca | Method::Ica | Method::Sc => {
            let enc = match encoder {
                Some(e) => e,
                None => fit_encoder(cfg, train)?,
            };
            if enc.input_dim() != d {
                return Err(Error::Dimension {
                    what: "encoder input",
                    expected: d,
                    actual: enc.input_dim(),
                });
            }
            let n = enc.output_dim();
            (Hidden::Unsup(enc), RateNetwork::readout(n, 10, cfg.loss, cfg.seed))
        }
        Method::Bp | Method::Fa => {
            let h = initial_hidden(cfg, train)?;
            let net = RateNetwork::with_hidden(Layer::from_hidden(&h), 10, cfg.loss, cfg.seed);
            (Hidden::None, net)
        }
    };
    Ok(Model::Rate { hidden, net })
}

fn limit(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

/// Trains `model` as configured.
pub fn train_model(cfg: &ExperimentConfig, model: &mut Model, train_set: &Dataset, test_set: &Dataset) -> Result<RunOutput> {
    let test_owned;
    let test_set = match limit(cfg.test_limit) {
        Some(n) if !cfg.spiking => {
            test_owned = test_set.head(n);
            &test_owned
        }
        _ => test_set,
    };
    let mut diagnostics = None;
    let mut record = match model {
        Model::Spiking(net) => {
            let spec = SpikingTrainSpec {
                alpha: cfg.stdp_alpha,
                presentations: cfg.presentations,
                seed: cfg.seed,
                mode: cfg.integration(),
                eval_every: cfg.eval_every,
                train_eval_limit: limit(cfg.train_eval_limit),
                test_limit: limit(cfg.test_limit),
            };
            let (record, diag) = train_spiking(net, &cfg.protocol, train_set, test_set, &spec)?;
            diagnostics = Some(diag);
            record
        }
        Model::Rate { hidden, net } => {
            let algorithm = match cfg.method {
                Method::Sp => Algorithm::Sp,
                Method::Bp => Algorithm::Bp,
                Method::Fa => Algorithm::Fa,
                _ => Algorithm::Delta,
            };
            let alpha = if cfg.method == Method::Sp {
                cfg.alpha
            } else {
                effective_alpha(cfg.alpha, cfg.n_h)
            };
            let spec = TrainSpec {
                algorithm,
                alpha,
                iterations: cfg.iterations,
                seed: cfg.seed,
                eval_every: cfg.eval_every,
                train_eval_limit: limit(cfg.train_eval_limit),
            };
            let feedback = (algorithm == Algorithm::Fa).then(|| FeedbackMatrices::random(net, cfg.seed));
            match hidden.encoder() {
                None => {
                    let tr = CachedSource::raw(train_set);
                    let te = CachedSource::raw(test_set);
                    train(net, &tr, &te, &spec, feedback.as_ref())?
                }
                Some(enc) => {
                    let budget = cfg.feature_budget_mb << 20;
                    let tr = Features::new(enc, train_set, budget);
                    let te = Features::new(enc, test_set, budget);
                    train(net, &tr, &te, &spec, None)?
                }
            }
        }
    };
    let mut config = cfg.to_pairs();
    config.append(&mut record.config);
    record.config = config;
    Ok(RunOutput {
        record,
        model: model.clone(),
        diagnostics,
    })
}

/// Builds and trains the configured model.
pub fn run_on(cfg: &ExperimentConfig, train_set: &Dataset, test_set: &Dataset) -> Result<RunOutput> {
    let mut model = build_model(cfg, train_set, None)?;
    train_model(cfg, &mut model, train_set, test_set)
}

/// Loads the configured dataset from `dir` and runs the experiment.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let (train_set, test_set) = load_data(cfg, dir)?;
    run_on(cfg, &train_set, &test_set)
}

/// Test accuracy of a trained model.
pub fn evaluate_model(cfg: &ExperimentConfig, model: &Model, test_set: &Dataset) -> Result<f64> {
    match model {
        Model::Spiking(net) => {
            let mut diag = SpikingDiagnostics::default();
            classify_spiking(net, &cfg.protocol, test_set, limit(cfg.test_limit), cfg.integration(), &mut diag)
        }
        Model::Rate { hidden, net } => Ok(match hidden.encoder() {
            None => evaluate(net, &CachedSource::raw(test_set), limit(cfg.test_limit)),
            Some(enc) => {
                let te = Features::new(enc, test_set, cfg.feature_budget_mb << 20);
                evaluate(net, &te, limit(cfg.test_limit))
            }
        }),
    }
}

/// Writes the trained weights. Fixed hidden layers are not stored; they
/// are rebuilt from the configuration and seed.
pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    match model {
        Model::Rate { net, .. } => ratenet::save_network(path, net),
        Model::Spiking(net) => {
            let mut tensors: Vec<Tensor> = net
                .projections
                .iter()
                .enumerate()
                .map(|(l, p)| Tensor::from_matrix(format!("W{}", l + 1), &p.w))
                .collect();
            for (l, layer) in net.layers.iter().enumerate() {
                tensors.push(Tensor::from_vector(format!("theta{l}"), &layer.theta.clone().into()));
            }
            checkpoint::save(path, &tensors)
        }
    }
}

/// Loads weights written by [`save_model`] into a model of the same shape.
pub fn load_model_weights(path: &Path, model: &mut Model) -> Result<()> {
    match model {
        Model::Rate { net, .. } => ratenet::load_weights(path, net),
        Model::Spiking(net) => {
            let tensors = checkpoint::load(path)?;
            let last = net.projections.len() - 1;
            for l in 0..net.projections.len() {
                let w = checkpoint::find(&tensors, &format!("W{}", l + 1))?.to_matrix()?;
                if w.dim() != net.projections[l].w.dim() {
                    return Err(Error::Dimension {
                        what: "spiking weights",
                        expected: net.projections[l].w.len(),
                        actual: w.len(),
                    });
                }
                net.projections[l] = if l < last {
                    spiking::Projection::fixed(w)
                } else {
                    spiking::Projection::plastic(w)
                };
            }
            for (l, layer) in net.layers.iter_mut().enumerate() {
                let theta = checkpoint::find(&tensors, &format!("theta{l}"))?.to_vector()?;
                if theta.len() != layer.len() {
                    return Err(Error::Dimension {
                        what: "thresholds",
                        expected: layer.len(),
                        actual: theta.len(),
                    });
                }
                layer.theta = theta.to_vec();
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{preprocess_pair, ImageDims, RawDataset};

    /// Tiny synthetic 8×8 dataset: class k is a bright row k (k < 8) or
    /// column pair (k ≥ 8), with pixel noise.
    pub(crate) fn toy(n: usize, seed: u64) -> RawDataset {
        use rand::Rng as _;
        let mut rng = crate::linalg::seeded_rng(seed, 77);
        let dims = ImageDims::new(8, 8, 1);
        let mut images = Vec::with_capacity(n * 64);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let k = (i % 10) as u8;
            labels.push(k);
            for r in 0..8 {
                for c in 0..8 {
                    let on = if k < 8 { r == k as usize } else { c == 2 * (k as usize - 8) + 1 };
                    let base = if on { 200.0 } else { 20.0 };
                    let v: f64 = base + rng.random_range(-20.0..20.0);
                    images.push(v.clamp(0.0, 255.0) as u8);
                }
            }
        }
        RawDataset::new(images, labels, dims, Split::Train).unwrap()
    }

    fn toy_pair() -> (Dataset, Dataset) {
        let mut te = toy(100, 2);
        te.split = Split::Test;
        preprocess_pair(&toy(300, 1), &te).unwrap()
    }

    fn small(method: Method, scope: Scope) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            method,
            scope,
            n_h: 40,
            p: 4,
            n_pop: 10,
            alpha: 0.01,
            iterations: 600,
            eval_every: 300,
            downsample: 8,
            ..ExperimentConfig::default()
        };
        c.sc.presentations = 200;
        c.sc.n_iter = 10;
        c
    }

    #[test]
    fn every_method_runs_and_is_deterministic() {
        let (tr, te) = toy_pair();
        for m in Method::ALL {
            for scope in [Scope::Full, Scope::Localized] {
                let cfg = small(m, scope);
                let a = run_on(&cfg, &tr, &te).unwrap();
                let b = run_on(&cfg, &tr, &te).unwrap();
                assert_eq!(a.record.snapshots.len(), b.record.snapshots.len());
                for (x, y) in a.record.snapshots.iter().zip(&b.record.snapshots) {
                    assert_eq!((x.iteration, x.train_acc, x.test_acc), (y.iteration, y.train_acc, y.test_acc));
                }
                let last = a.record.final_snapshot().unwrap();
                assert!((0.0..=1.0).contains(&last.test_acc));
                assert!(a.record.snapshots.windows(2).all(|w| w[0].iteration < w[1].iteration));
                assert_eq!(a.record.config_value("method"), Some(m.as_str()));
            }
        }
    }

    #[test]
    fn invalid_config_fails_before_compute() {
        let (tr, te) = toy_pair();
        let mut cfg = small(Method::Pca, Scope::Full);
        cfg.n_h = 65;
        match run_on(&cfg, &tr, &te) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "n_h"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_weights_round_trip() {
        let (tr, te) = toy_pair();
        let dir = tempfile::tempdir().unwrap();
        for spiking in [false, true] {
            let mut cfg = small(Method::Rp, Scope::Localized);
            cfg.spiking = spiking;
            cfg.presentations = 3;
            cfg.test_limit = 5;
            cfg.train_eval_limit = 5;
            cfg.dt = 0.1;
            let out = run_on(&cfg, &tr, &te).unwrap();
            let path = dir.path().join(format!("m{spiking}.sbnw"));
            save_model(&path, &out.model).unwrap();
            let mut fresh = build_model(&cfg, &tr, None).unwrap();
            assert_ne!(fresh, out.model);
            load_model_weights(&path, &mut fresh).unwrap();
            match (&fresh, &out.model) {
                (Model::Spiking(a), Model::Spiking(b)) => {
                    assert_eq!(a.projections, b.projections);
                    assert!(a.layers.iter().zip(&b.layers).all(|(x, y)| x.theta == y.theta));
                }
                (a, b) => assert_eq!(a, b),
            }
        }
    }
}
