//! Training run records and their CSV form.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Seconds since the start of training.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    /// Flat `key = value` echo of the configuration that produced the run.
    pub config: Vec<(String, String)>,
    /// Ordered by iteration.
    pub snapshots: Vec<Snapshot>,
}

impl RunRecord {
    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn final_test_acc(&self) -> f64 {
        self.final_snapshot().map_or(f64::NAN, |s| s.test_acc)
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "train_acc", "test_acc", "wall_time"])?;
        for s in &self.snapshots {
            w.write_record([
                s.iteration.to_string(),
                s.train_acc.to_string(),
                s.test_acc.to_string(),
                s.wall_time.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Vec<Snapshot>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for row in r.records() {
            let row = row?;
            let field = |i: usize| -> Result<f64> {
                row.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::config(format!("column {i}"), "unparsable run-record value"))
            };
            out.push(Snapshot {
                iteration: field(0)? as u64,
                train_acc: field(1)?,
                test_acc: field(2)?,
                wall_time: field(3)?,
            });
        }
        Ok(out)
    }

    /// Writes `records.csv` and `config.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_csv(&dir.join("records.csv"))?;
        let echo = crate::checkpoint::format_key_values(self.config.iter().map(|(k, v)| (k.as_str(), v.clone())));
        let path = dir.join("config.txt");
        fs::write(&path, echo).map_err(|e| Error::io(&path, e))
    }
}
