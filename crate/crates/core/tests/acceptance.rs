//! End-to-end acceptance checks. Prints one `PASS`, `FAIL` or `SKIP` line
//! per criterion.
//!
//! Environment:
//! - `SHALLOWNET_DATA_DIR`: dataset root (defaults to the workspace `data/`).
//! - `SHALLOWNET_FULL=1`: also run the long full-scale configurations.
//! - `SHALLOWNET_STRICT=1`: exit with a failure status if any criterion fails.
//! - `SHALLOWNET_ONLY=1,4,8`: run only the listed criteria.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use shallownet::datasets::{effective_dimension, Dataset, DatasetKind, Split};
use shallownet::harness::{self, fit_encoder, load_data, run_on, ExperimentConfig, Method, Scope};
use shallownet::ratenet::check::{fa_transpose_gap, gradient_suite, GradientCase};
use shallownet::spiking::fidelity::{event_euler_deviation, isi_rate, stdp_vs_rate_rule};
use shallownet::spiking::Integration;
use shallownet::unsup::sparsity;

const MNIST_TRAIN: u64 = 60_000;

// Pinned tolerances.
const SP_BAND: (f64, f64) = (0.910, 0.928);
/// Regression bound for l-RP (n_h = 1000, p = 10, 10 epochs), set just
/// below the measured 0.9583.
const LRP_DESK_BOUND: f64 = 0.953;
const LRP_FULL_BAND: (f64, f64) = (0.981, 0.987);
const RG_RP_MIN_GAP: f64 = 0.002;
const P_GRID: [usize; 7] = [1, 5, 10, 15, 20, 25, 28];
const P_ACCEPTED: [usize; 3] = [5, 10, 15];
const SC_SPARSITY_BAND: (f64, f64) = (0.90, 0.99);
const D_EFF_BAND: (usize, usize) = (15, 30);
const GRADIENT_TOL: f64 = 1e-5;
const ISI_TOL: f64 = 0.02;
const EVENT_EULER_TOL: f64 = 0.02;
const STDP_RATE_TOL: f64 = 0.05;
const SPIKING_DESK_BOUND: f64 = 0.90;
const SPIKING_FULL_BAND: (f64, f64) = (0.979, 0.988);
const CIFAR_LRP_BOUND: f64 = 0.45;
const CIFAR_SP_BAND_TOP: f64 = 0.411;
const CIFAR_BP_FULL_BAND: (f64, f64) = (0.573, 0.593);

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Outcome {
            status: Status::Skip,
            detail: detail.into(),
        }
    }

    fn error(e: impl fmt::Display) -> Self {
        Outcome {
            status: Status::Fail,
            detail: format!("error: {e}"),
        }
    }
}

fn in_band(v: f64, band: (f64, f64)) -> bool {
    v >= band.0 && v <= band.1
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

/// Loaded datasets and finished runs shared between criteria.
struct Ctx {
    dir: PathBuf,
    full: bool,
    data: HashMap<(DatasetKind, usize), (Dataset, Dataset)>,
    runs: HashMap<String, f64>,
}

impl Ctx {
    fn has(&self, kind: DatasetKind) -> bool {
        kind.load(&self.dir, Split::Test).is_ok()
    }

    fn data(&mut self, cfg: &ExperimentConfig) -> Res<&(Dataset, Dataset)> {
        let key = (cfg.dataset, cfg.downsample);
        if !self.data.contains_key(&key) {
            let pair = load_data(cfg, &self.dir)?;
            self.data.insert(key, pair);
        }
        Ok(&self.data[&key])
    }

    /// Final test accuracy of `cfg`, computed once per distinct config.
    fn test_acc(&mut self, cfg: &ExperimentConfig) -> Res<f64> {
        let key = cfg.to_text();
        if let Some(&acc) = self.runs.get(&key) {
            return Ok(acc);
        }
        cfg.validate()?;
        let (train, test) = self.data(cfg)?;
        let t = Instant::now();
        let out = run_on(cfg, train, test)?;
        let acc = out.record.final_snapshot().map_or(f64::NAN, |s| s.test_acc);
        eprintln!("  {} seed {} p {} n_h {}: test {acc:.4} ({:.0}s)", cfg.label(), cfg.seed, cfg.p, cfg.n_h, t.elapsed().as_secs_f64());
        self.runs.insert(key, acc);
        Ok(acc)
    }
}

fn mnist_rate(method: Method, n_h: usize, p: usize, epochs: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        method,
        scope: Scope::Localized,
        n_h,
        p,
        iterations: epochs * MNIST_TRAIN,
        seed,
        eval_every: 0,
        ..ExperimentConfig::default()
    }
}

fn sp_baseline(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ExperimentConfig {
        method: Method::Sp,
        iterations: 10_000_000,
        eval_every: 0,
        ..ExperimentConfig::default()
    };
    let acc = ctx.test_acc(&cfg)?;
    Ok(Outcome::check(in_band(acc, SP_BAND), format!("test {acc:.4}, band {SP_BAND:?}")))
}

fn lrp_desk(ctx: &mut Ctx) -> Res<Outcome> {
    let acc = ctx.test_acc(&mnist_rate(Method::Rp, 1000, 10, 10, 0))?;
    Ok(Outcome::check(acc > LRP_DESK_BOUND, format!("test {acc:.4}, bound {LRP_DESK_BOUND}")))
}

fn lrp_full(ctx: &mut Ctx) -> Res<Outcome> {
    if !ctx.full {
        return Ok(Outcome::skip("set SHALLOWNET_FULL=1 (n_h 5000, 167 epochs)"));
    }
    let acc = ctx.test_acc(&mnist_rate(Method::Rp, 5000, 10, 167, 0))?;
    Ok(Outcome::check(in_band(acc, LRP_FULL_BAND), format!("test {acc:.4}, band {LRP_FULL_BAND:?}")))
}

fn gabor_beats_random(ctx: &mut Ctx) -> Res<Outcome> {
    let mut gaps = Vec::new();
    for seed in 0..5 {
        let rg = ctx.test_acc(&mnist_rate(Method::Rg, 1000, 10, 10, seed))?;
        let rp = ctx.test_acc(&mnist_rate(Method::Rp, 1000, 10, 10, seed))?;
        gaps.push(rg - rp);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let gaps_pts: Vec<String> = gaps.iter().map(|g| format!("{:.2}", 100.0 * g)).collect();
    Ok(Outcome::check(
        mean >= RG_RP_MIN_GAP,
        format!("mean gap {:.2} points (per seed {}), minimum {:.1}", 100.0 * mean, gaps_pts.join(" "), 100.0 * RG_RP_MIN_GAP),
    ))
}

fn patch_optimum(ctx: &mut Ctx) -> Res<Outcome> {
    let mut errs = Vec::new();
    for p in P_GRID {
        errs.push((p, 1.0 - ctx.test_acc(&mnist_rate(Method::Rp, 1000, p, 10, 0))?));
    }
    let best = errs.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty grid").0;
    let table: Vec<String> = errs.iter().map(|(p, e)| format!("{p}:{:.2}%", 100.0 * e)).collect();
    Ok(Outcome::check(
        P_ACCEPTED.contains(&best),
        format!("argmin p = {best} (test error {})", table.join(" ")),
    ))
}

fn sc_sparsity(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ExperimentConfig {
        method: Method::Sc,
        scope: Scope::Full,
        n_h: 500,
        ..ExperimentConfig::default()
    };
    let (train, test) = ctx.data(&cfg)?;
    let enc = fit_encoder(&cfg, train)?;
    let s = sparsity(&enc, test.head(1000).vectors.view());
    Ok(Outcome::check(in_band(s, SC_SPARSITY_BAND), format!("zero fraction {s:.4}, band {SC_SPARSITY_BAND:?}")))
}

fn d_eff(ctx: &mut Ctx) -> Res<Outcome> {
    let (train, _) = ctx.data(&ExperimentConfig::default())?;
    let d = effective_dimension(train, 0.9)?;
    Ok(Outcome::check(
        d >= D_EFF_BAND.0 && d <= D_EFF_BAND.1,
        format!("d_eff = {d}, band {D_EFF_BAND:?}"),
    ))
}

fn gradients(_: &mut Ctx) -> Res<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for case in GradientCase::ALL {
        let e = gradient_suite(case, 100, 0)?;
        parts.push(format!("{} {e:.1e}", case.name()));
        worst = worst.max(e);
    }
    let fa = fa_transpose_gap(100, 0)?;
    Ok(Outcome::check(
        worst < GRADIENT_TOL && fa == 0.0,
        format!("{}; fa(Wᵀ) − bp max {fa:e}", parts.join(", ")),
    ))
}

fn isi_fidelity(_: &mut Ctx) -> Res<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for ratio in [1.2, 2.0, 5.0] {
        for (name, mode) in [("event", Integration::Event), ("euler", Integration::Euler { dt: 0.01 })] {
            let (sim, pred) = isi_rate(ratio, mode, 100)?;
            let rel = ((sim - pred) / pred).abs();
            worst = worst.max(rel);
            parts.push(format!("{ratio}/{name} {rel:.1e}"));
        }
    }
    Ok(Outcome::check(worst <= ISI_TOL, format!("relative error {}", parts.join(", "))))
}

fn event_vs_euler(_: &mut Ctx) -> Res<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        worst = worst.max(event_euler_deviation(seed, 1000.0, 0.01)?);
    }
    Ok(Outcome::check(
        worst <= EVENT_EULER_TOL,
        format!("worst count deviation {:.2}% over 5 networks", 100.0 * worst),
    ))
}

fn stdp_vs_rate(_: &mut Ctx) -> Res<Outcome> {
    let (m, p) = stdp_vs_rate_rule(5000.0, Integration::Event)?;
    let rel = ((m - p) / p).abs();
    Ok(Outcome::check(rel <= STDP_RATE_TOL, format!("Δw {m:.5e} vs {p:.5e} ({:.2}%)", 100.0 * rel)))
}

fn spiking_cfg(n_h: usize, p: usize, downsample: usize, alpha: f64, presentations: u64, dt: f64) -> ExperimentConfig {
    ExperimentConfig {
        method: Method::Rp,
        scope: Scope::Localized,
        downsample,
        n_h,
        p,
        spiking: true,
        stdp_alpha: alpha,
        presentations,
        dt,
        eval_every: 0,
        train_eval_limit: 1000,
        ..ExperimentConfig::default()
    }
}

fn spiking_desk(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = spiking_cfg(500, 5, 12, 30.0, 2 * MNIST_TRAIN, 0.05);
    cfg.validate()?;
    let (train, test) = ctx.data(&cfg)?;
    let t = Instant::now();
    let out = run_on(&cfg, train, test)?;
    let acc = out.record.final_snapshot().map_or(f64::NAN, |s| s.test_acc);
    let diag = out.diagnostics.expect("spiking run");
    eprintln!("  spiking 12x12: test {acc:.4} ({:.0}s), {diag:?}", t.elapsed().as_secs_f64());
    Ok(Outcome::check(
        acc > SPIKING_DESK_BOUND && diag.gated_abs_dw == 0.0,
        format!(
            "test {acc:.4}, bound {SPIKING_DESK_BOUND}; gated |ΔW| = {}, learning |ΔW| = {:.3e}",
            diag.gated_abs_dw, diag.learning_abs_dw
        ),
    ))
}

fn spiking_full(ctx: &mut Ctx) -> Res<Outcome> {
    if !ctx.full {
        return Ok(Outcome::skip("set SHALLOWNET_FULL=1 (n_h 5000, 117 epochs, multi-day)"));
    }
    let cfg = spiking_cfg(5000, 10, 0, 2e-4, 117 * MNIST_TRAIN, 0.0);
    let acc = ctx.test_acc(&cfg)?;
    Ok(Outcome::check(in_band(acc, SPIKING_FULL_BAND), format!("test {acc:.4}, band {SPIKING_FULL_BAND:?}")))
}

fn cifar_rate(method: Method, epochs: u64) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetKind::Cifar10,
        method,
        n_h: 1000,
        p: 10,
        iterations: epochs * 50_000,
        eval_every: 0,
        ..ExperimentConfig::default()
    }
}

fn cifar_desk(ctx: &mut Ctx) -> Res<Outcome> {
    if !ctx.has(DatasetKind::Cifar10) {
        return Ok(Outcome::skip(format!("CIFAR-10 not found under {}", ctx.dir.display())));
    }
    let rp = ctx.test_acc(&cifar_rate(Method::Rp, 10))?;
    let rg = ctx.test_acc(&cifar_rate(Method::Rg, 10))?;
    Ok(Outcome::check(
        rp > CIFAR_LRP_BOUND && rp.min(rg) > CIFAR_SP_BAND_TOP,
        format!("l-rp {rp:.4} (bound {CIFAR_LRP_BOUND}), l-rg {rg:.4}; SP band top {CIFAR_SP_BAND_TOP}"),
    ))
}

fn cifar_full(ctx: &mut Ctx) -> Res<Outcome> {
    if !ctx.has(DatasetKind::Cifar10) {
        return Ok(Outcome::skip(format!("CIFAR-10 not found under {}", ctx.dir.display())));
    }
    if !ctx.full {
        return Ok(Outcome::skip("set SHALLOWNET_FULL=1 (l-bp, n_h 5000)"));
    }
    let cfg = ExperimentConfig {
        n_h: 5000,
        iterations: 10_000_000,
        ..cifar_rate(Method::Bp, 0)
    };
    let acc = ctx.test_acc(&cfg)?;
    Ok(Outcome::check(in_band(acc, CIFAR_BP_FULL_BAND), format!("test {acc:.4}, band {CIFAR_BP_FULL_BAND:?}")))
}

type Criterion = (&'static str, &'static str, bool, fn(&mut Ctx) -> Res<Outcome>);

fn main() {
    let dir = std::env::var_os(harness::DATA_DIR_ENV).map_or_else(harness::data_dir, PathBuf::from);
    let only: Option<Vec<String>> = std::env::var("SHALLOWNET_ONLY")
        .ok()
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect());
    let mut ctx = Ctx {
        full: std::env::var("SHALLOWNET_FULL").is_ok_and(|v| v == "1"),
        dir,
        data: HashMap::new(),
        runs: HashMap::new(),
    };
    let mnist = ctx.has(DatasetKind::Mnist);
    let criteria: [Criterion; 15] = [
        ("1", "SP baseline", true, sp_baseline),
        ("2", "l-RP desk-scale bound", true, lrp_desk),
        ("2-full", "l-RP full configuration", true, lrp_full),
        ("3", "l-RG beats l-RP", true, gabor_beats_random),
        ("4", "receptive-field optimum", true, patch_optimum),
        ("5", "SC sparsity", true, sc_sparsity),
        ("6", "effective dimension", true, d_eff),
        ("7", "gradient suite", false, gradients),
        ("8a", "LIF rate vs ISI", false, isi_fidelity),
        ("8b", "event vs Euler counts", false, event_vs_euler),
        ("8c", "STDP vs rate rule", false, stdp_vs_rate),
        ("9", "spiking 12x12 MNIST", true, spiking_desk),
        ("9-full", "spiking full configuration", true, spiking_full),
        ("10", "CIFAR-10 desk-scale", false, cifar_desk),
        ("10-full", "CIFAR-10 l-BP full configuration", false, cifar_full),
    ];
    let mut failed = 0;
    let total = Instant::now();
    for (id, name, needs_mnist, f) in criteria {
        let base = id.split('-').next().unwrap_or(id);
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id || x == base)) {
            continue;
        }
        let t = Instant::now();
        let outcome = if needs_mnist && !mnist {
            Outcome::skip(format!("MNIST not found under {}", ctx.dir.display()))
        } else {
            f(&mut ctx).unwrap_or_else(Outcome::error)
        };
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("{tag} criterion {id} ({name}): {} [{:.1}s]", outcome.detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance finished in {:.0}s, {failed} failing", total.elapsed().as_secs_f64());
    if failed > 0 && std::env::var("SHALLOWNET_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
