use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use shallownet::checkpoint::format_key_values;
use shallownet::harness::{
    self, build_model, emit_plotdata, evaluate_model, fit_encoder, load_data, load_model_weights, read_sweep_csv,
    save_model, sweep, train_model, write_sweep_csv, ExperimentConfig, Hidden, Model, SweepAxis,
};
use shallownet::spiking::{record_raster, write_raster_csv};
use shallownet::unsup::{load_encoder, save_encoder};

#[derive(Parser)]
#[command(name = "shallownet", version, about = "Shallow networks with local learning rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (defaults to $SHALLOWNET_DATA_DIR or ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Configuration overrides as `--key value` pairs, after `--`.
    #[arg(last = true)]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(harness::data_dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit an unsupervised (pca, ica, sc) encoder and save it.
    FitEncoder {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a rate-based model; writes records, config echo and weights.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Previously fitted encoder to use instead of fitting one.
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Train a spiking network with supervised STDP.
    TrainSpiking {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a configuration over an axis of n_h or p values and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one run directory per job here.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
    /// Test accuracy of saved weights.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Spike raster (time, neuron, layer) of the first training patterns.
    ExportRaster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        patterns: usize,
        /// Start from saved spiking weights.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Percentile bands (series, x, median, p25, p75) from a sweep CSV.
    EmitPlotdata {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_run(dir: &Path, out: &harness::RunOutput) -> Result<()> {
    out.record.write_dir(dir)?;
    save_model(&dir.join("model.sbnw"), &out.model)?;
    if let Model::Rate {
        hidden: Hidden::Unsup(enc),
        ..
    } = &out.model
    {
        save_encoder(&dir.join("encoder.sbnw"), enc)?;
    }
    if let Some(d) = &out.diagnostics {
        let text = format_key_values([
            ("gated_abs_dw", d.gated_abs_dw.to_string()),
            ("learning_abs_dw", d.learning_abs_dw.to_string()),
            ("silent_outputs", d.silent_outputs.to_string()),
            ("rate_bound_violations", d.rate_bound_violations.to_string()),
            ("presentations", d.presentations.to_string()),
        ]);
        let path = dir.join("diagnostics.txt");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn train_command(common: &Common, out: &Path, encoder: Option<&Path>, spiking: bool) -> Result<()> {
    let mut cfg = common.config()?;
    if spiking {
        cfg.spiking = true;
        cfg.validate()?;
    }
    let (train, test) = load_data(&cfg, &common.data_dir())?;
    let enc = encoder.map(load_encoder).transpose()?;
    let mut model = build_model(&cfg, &train, enc)?;
    let result = train_model(&cfg, &mut model, &train, &test)?;
    write_run(out, &result)?;
    if let Some(s) = result.record.final_snapshot() {
        println!("iterations {} train {:.4} test {:.4}", s.iteration, s.train_acc, s.test_acc);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::FitEncoder { common, out } => {
            let cfg = common.config()?;
            let (train, _) = load_data(&cfg, &common.data_dir())?;
            let enc = fit_encoder(&cfg, &train)?;
            save_encoder(&out, &enc)?;
        }
        Command::Train { common, out, encoder } => train_command(&common, &out, encoder.as_deref(), false)?,
        Command::TrainSpiking { common, out } => train_command(&common, &out, None, true)?,
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
            out,
            runs_dir,
        } => {
            let cfg = common.config()?;
            let points = if values.is_empty() {
                Vec::new()
            } else {
                let (train, test) = load_data(&cfg, &common.data_dir())?;
                sweep(&cfg, axis, &values, &seeds, &train, &test, runs_dir.as_deref())?
            };
            write_sweep_csv(&out, &points)?;
        }
        Command::Eval {
            common,
            checkpoint,
            encoder,
        } => {
            let cfg = common.config()?;
            let (train, test) = load_data(&cfg, &common.data_dir())?;
            let enc = encoder.as_deref().map(load_encoder).transpose()?;
            let mut model = build_model(&cfg, &train, enc)?;
            load_model_weights(&checkpoint, &mut model)?;
            println!("test {:.4}", evaluate_model(&cfg, &model, &test)?);
        }
        Command::ExportRaster {
            common,
            out,
            patterns,
            checkpoint,
        } => {
            let mut cfg = common.config()?;
            cfg.spiking = true;
            cfg.validate()?;
            let (train, _) = load_data(&cfg, &common.data_dir())?;
            let mut model = build_model(&cfg, &train, None)?;
            if let Some(c) = &checkpoint {
                load_model_weights(c, &mut model)?;
            }
            let Model::Spiking(net) = &mut model else {
                bail!("raster export needs a spiking configuration");
            };
            let spikes = record_raster(net, &cfg.protocol, &train, patterns, cfg.stdp_alpha, cfg.integration())?;
            write_raster_csv(&out, &spikes)?;
        }
        Command::EmitPlotdata { input, out } => {
            let points = read_sweep_csv(&input)?;
            for p in emit_plotdata(&points, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
