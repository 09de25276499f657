//! Run records and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::diagnostics::Diagnostic;
use crate::error::{LqgError, Result};
use crate::ARTIFACT_VERSION;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    pub artifact_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub stage_seconds: BTreeMap<String, f64>,
    pub summary: Map<String, Value>,
    pub diagnostics: Vec<String>,
    pub outputs: Vec<String>,
}

/// A record under construction together with its output directory.
#[derive(Debug)]
pub struct Recorder {
    pub record: RunRecord,
    pub dir: PathBuf,
    pub flags: Vec<Diagnostic>,
}

impl Recorder {
    pub fn new(command: &str, config: &ExperimentConfig, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let config_hash = config.hash();
        let mut h = Sha256::new();
        h.update(ARTIFACT_VERSION.as_bytes());
        h.update(command.as_bytes());
        h.update(config.canonical_toml().as_bytes());
        let run_id = hex::encode(&h.finalize()[..6]);
        Ok(Recorder {
            record: RunRecord {
                run_id,
                command: command.to_string(),
                artifact_version: ARTIFACT_VERSION.to_string(),
                config_hash,
                config: config.clone(),
                seeds: Vec::new(),
                stage_seconds: BTreeMap::new(),
                summary: Map::new(),
                diagnostics: Vec::new(),
                outputs: Vec::new(),
            },
            dir: dir.to_path_buf(),
            flags: Vec::new(),
        })
    }

    /// Runs `f`, recording its wall-clock time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        *self.record.stage_seconds.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        Ok(out)
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.record.summary.insert(key.to_string(), v);
    }

    pub fn flag(&mut self, d: Diagnostic) {
        log::warn!("{d}");
        self.record.diagnostics.push(d.to_string());
        self.flags.push(d);
    }

    pub fn flags(&mut self, ds: impl IntoIterator<Item = Diagnostic>) {
        for d in ds {
            self.flag(d);
        }
    }

    /// Writes a CSV with the run-id comment line, a header and the rows.
    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        self.csv_with_trailer(name, header, rows, None)
    }

    pub fn csv_with_trailer(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
        trailer: Option<String>,
    ) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# run_id={} config_hash={}", self.record.run_id, self.record.config_hash).unwrap();
        writeln!(s, "{header}").unwrap();
        for r in rows {
            writeln!(s, "{r}").unwrap();
        }
        if let Some(t) = trailer {
            writeln!(s, "# {t}").unwrap();
        }
        std::fs::write(self.dir.join(name), s)?;
        self.output(name);
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        if !self.record.outputs.iter().any(|o| o == name) {
            self.record.outputs.push(name.to_string());
        }
    }

    /// Writes `<command>_record.json` and returns the record.
    pub fn finish(mut self) -> Result<(RunRecord, Vec<Diagnostic>)> {
        let name = format!("{}_record.json", self.record.command);
        self.output(&name);
        let json = serde_json::to_string_pretty(&self.record).map_err(|e| LqgError::Format(e.to_string()))?;
        std::fs::write(self.dir.join(&name), json)?;
        Ok((self.record, self.flags))
    }
}

/// Reads the rows of a CSV written by [`Recorder::csv`], skipping comments
/// and the header.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

pub fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| LqgError::Format(format!("{}: cannot parse {s:?} as a number", path.display())))
}
