//! Run directories: time-series CSV, JSON records and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{load_config, ScenarioConfig};
use super::run::{RunOutput, RunRecord, RunStatus, Snapshots};
use crate::error::{Error, Result};
use crate::verify::CSV_COLUMNS;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.toml";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const RECORD_FILE: &str = "records.json";
pub const SNAPSHOT_FILE: &str = "snapshots.json";
pub const VERIFICATION_FILE: &str = "verification.json";
pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// SHA-256 of the emitted `config.toml`.
    pub config_sha256: String,
    pub version: String,
    pub csv_schema: u32,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub status: RunStatus,
    pub abort_reason: Option<String>,
    pub verification_pass: bool,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn timeseries_csv(record: &RunRecord) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in &record.series {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<FileEntry>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    files.retain(|f| f.name != name);
    files.push(FileEntry { name: name.into(), sha256: sha256_hex(contents.as_bytes()), bytes: contents.len() as u64 });
    Ok(())
}

/// Writes every output of a run into `dir` and returns the manifest.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput, started_unix: f64) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let config_text = cfg.to_toml()?;
    let mut files = Vec::new();
    write_file(dir, CONFIG_FILE, &config_text, &mut files)?;
    write_file(dir, TIMESERIES_FILE, &timeseries_csv(&out.record), &mut files)?;
    write_file(dir, RECORD_FILE, &json(&out.record)?, &mut files)?;
    write_file(dir, SNAPSHOT_FILE, &json(&out.snapshots)?, &mut files)?;
    write_file(dir, VERIFICATION_FILE, &json(&out.verification)?, &mut files)?;
    if let Some(c) = &out.classification {
        write_file(dir, CLASSIFICATION_FILE, &json(c)?, &mut files)?;
    }
    let manifest = RunManifest {
        scenario: cfg.scenario.clone(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        version: env!("CARGO_PKG_VERSION").into(),
        csv_schema: CSV_SCHEMA_VERSION,
        started_unix,
        finished_unix: unix_now(),
        status: out.record.status,
        abort_reason: out.record.abort_reason.clone(),
        verification_pass: out.verification.pass,
        files,
    };
    fs::write(dir.join(MANIFEST_FILE), json(&manifest)?)?;
    Ok(manifest)
}

/// Rewrites one JSON file of an existing run and updates the manifest.
pub fn update_run_file<T: Serialize>(dir: &Path, name: &str, value: &T, verification_pass: Option<bool>) -> Result<()> {
    let mut manifest = read_manifest(dir)?;
    write_file(dir, name, &json(value)?, &mut manifest.files)?;
    if let Some(p) = verification_pass {
        manifest.verification_pass = p;
    }
    fs::write(dir.join(MANIFEST_FILE), json(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
}

/// A run directory read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ScenarioConfig,
    pub manifest: RunManifest,
    pub record: RunRecord,
    pub snapshots: Snapshots,
}

/// Loads a run directory, checking the listed hashes.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest = read_manifest(dir)?;
    for f in &manifest.files {
        let bytes = fs::read(dir.join(&f.name))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::State(format!("{} does not match the manifest hash", f.name)));
        }
    }
    let config = load_config(&dir.join(CONFIG_FILE))?;
    let record = serde_json::from_str(&fs::read_to_string(dir.join(RECORD_FILE))?)?;
    let snapshots = serde_json::from_str(&fs::read_to_string(dir.join(SNAPSHOT_FILE))?)?;
    Ok(LoadedRun { dir: dir.to_path_buf(), config, manifest, record, snapshots })
}
