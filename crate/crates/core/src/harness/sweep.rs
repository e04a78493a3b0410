use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::{run_on, ExperimentConfig};
use crate::datasets::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepAxis {
    HiddenSize,
    PatchSize,
}

impl SweepAxis {
    pub fn key(&self) -> &'static str {
        match self {
            SweepAxis::HiddenSize => "n_h",
            SweepAxis::PatchSize => "p",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_h" | "n-h" | "nh" => Ok(SweepAxis::HiddenSize),
            "p" => Ok(SweepAxis::PatchSize),
            other => Err(Error::config("axis", format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Final accuracies of one (configuration, seed) job.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub series: String,
    pub axis: SweepAxis,
    pub x: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Runs `base` for every axis value and seed as independent jobs. Results
/// come back in (value, seed) order regardless of scheduling. With
/// `out_dir`, every job also writes its own run directory.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[usize],
    seeds: &[u64],
    train: &Dataset,
    test: &Dataset,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    let mut jobs = Vec::with_capacity(values.len() * seeds.len());
    for &x in values {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.set(axis.key(), &x.to_string())?;
            cfg.seed = seed;
            cfg.validate()?;
            jobs.push(cfg);
        }
    }
    jobs.par_iter()
        .map(|cfg| {
            let out = run_on(cfg, train, test)?;
            if let Some(dir) = out_dir {
                let name = format!("{}_{}{}_seed{}", cfg.label(), axis.key(), cfg.get(axis.key()).unwrap_or_default(), cfg.seed);
                out.record.write_dir(&dir.join(name))?;
            }
            let last = out.record.final_snapshot().copied();
            Ok(SweepPoint {
                series: cfg.label(),
                axis,
                x: cfg.get(axis.key()).and_then(|v| v.parse().ok()).unwrap_or(0),
                seed: cfg.seed,
                train_acc: last.map_or(f64::NAN, |s| s.train_acc),
                test_acc: last.map_or(f64::NAN, |s| s.test_acc),
            })
        })
        .collect()
}

const SWEEP_HEADER: [&str; 6] = ["series", "axis", "x", "seed", "train_acc", "test_acc"];

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.series.clone(),
            p.axis.key().to_string(),
            p.x.to_string(),
            p.seed.to_string(),
            p.train_acc.to_string(),
            p.test_acc.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            get(i)
                .parse()
                .map_err(|_| Error::config(SWEEP_HEADER[i], format!("cannot parse `{}`", get(i))))
        };
        out.push(SweepPoint {
            series: get(0).to_string(),
            axis: get(1).parse()?,
            x: num(2)? as usize,
            seed: num(3)? as u64,
            train_acc: num(4)?,
            test_acc: num(5)?,
        });
    }
    Ok(out)
}

/// Nearest-rank percentile: the smallest sample such that at least `q`
/// percent of the samples are less than or equal to it. `sorted` must be
/// ascending and non-empty.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Test-error percentiles of one series at one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub series: String,
    pub axis: SweepAxis,
    pub x: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

/// Groups points by (axis, series, x), ordered by those keys.
pub fn aggregate(points: &[SweepPoint]) -> Vec<Band> {
    let mut groups: BTreeMap<(SweepAxis, String, usize), Vec<f64>> = BTreeMap::new();
    for p in points {
        groups
            .entry((p.axis, p.series.clone(), p.x))
            .or_default()
            .push(1.0 - p.test_acc);
    }
    groups
        .into_iter()
        .map(|((axis, series, x), mut errs)| {
            errs.sort_by(f64::total_cmp);
            Band {
                series,
                axis,
                x,
                median: nearest_rank(&errs, 50.0),
                p25: nearest_rank(&errs, 25.0),
                p75: nearest_rank(&errs, 75.0),
            }
        })
        .collect()
}

/// Writes one CSV per sweep axis (`test_error_vs_<axis>.csv`) with columns
/// `series,x,median,p25,p75` of the test error.
pub fn emit_plotdata(points: &[SweepPoint], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let bands = aggregate(points);
    let mut written = Vec::new();
    for axis in [SweepAxis::HiddenSize, SweepAxis::PatchSize] {
        let rows: Vec<&Band> = bands.iter().filter(|b| b.axis == axis).collect();
        if rows.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("test_error_vs_{}.csv", axis.key()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["series", "x", "median", "p25", "p75"])?;
        for b in rows {
            w.write_record([
                b.series.clone(),
                b.x.to_string(),
                b.median.to_string(),
                b.p25.to_string(),
                b.p75.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(series: &str, x: usize, seed: u64, acc: f64) -> SweepPoint {
        SweepPoint {
            series: series.into(),
            axis: SweepAxis::HiddenSize,
            x,
            seed,
            train_acc: acc,
            test_acc: acc,
        }
    }

    #[test]
    fn nearest_rank_values() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&v, 25.0), 1.0);
        assert_eq!(nearest_rank(&v, 50.0), 2.0);
        assert_eq!(nearest_rank(&v, 75.0), 3.0);
        assert_eq!(nearest_rank(&v, 100.0), 4.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        let five = [15.0, 20.0, 35.0, 40.0, 50.0];
        assert_eq!(nearest_rank(&five, 30.0), 20.0);
        assert_eq!(nearest_rank(&five, 40.0), 20.0);
        assert_eq!(nearest_rank(&five, 50.0), 35.0);
    }

    #[test]
    fn single_seed_band_collapses() {
        let b = aggregate(&[pt("rp", 100, 0, 0.9)]);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].median, b[0].p25);
        assert_eq!(b[0].median, b[0].p75);
    }

    #[test]
    fn aggregation_ignores_order() {
        let mut pts: Vec<SweepPoint> = (0..10).map(|s| pt("rp", 100, s, 0.9 + 0.001 * s as f64)).collect();
        pts.push(pt("sc", 100, 0, 0.95));
        let a = aggregate(&pts);
        pts.reverse();
        assert_eq!(aggregate(&pts), a);
        assert_eq!(a.iter().map(|b| b.series.as_str()).collect::<Vec<_>>(), ["rp", "sc"]);
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![pt("l-rp", 1000, 3, 0.958_312_345_678_9), pt("sp", 0, 1, 0.1 + 0.2)];
        let path = dir.path().join("s.csv");
        write_sweep_csv(&path, &pts).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap(), pts);

        let files = emit_plotdata(&pts, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let mut r = csv::Reader::from_path(&files[0]).unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        let median: f64 = rows[0][2].parse().unwrap();
        assert!((median - (1.0 - 0.958_312_345_678_9)).abs() < 1e-12);
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_sweep_csv(&path, &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().trim(), SWEEP_HEADER.join(","));
        assert!(emit_plotdata(&[], dir.path()).unwrap().is_empty());
    }
}
