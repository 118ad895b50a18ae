//! Artifact writing: trace CSV, summary JSON/CSV and the run manifest.
//!
//! Everything is computed before the first file is created, so a rejected
//! config never leaves partial outputs behind. All CSV files start with a
//! `# length_unit=.. seed=..` comment line; JSON artifacts carry the same
//! two values as fields (JSON has no comments).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::ScenarioConfig;
use super::run::{execute, CsvTable, ScenarioOutput};
use crate::error::{Error, Result};
use crate::trace::write_trace_csv;

/// Paths of the artifacts one run produced.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub out_dir: PathBuf,
    pub trace: PathBuf,
    pub summary_json: PathBuf,
    pub tables: Vec<PathBuf>,
    pub manifest: PathBuf,
}

impl RunPaths {
    pub fn all(&self) -> Vec<&PathBuf> {
        let mut v = vec![&self.trace, &self.summary_json];
        v.extend(self.tables.iter());
        v.push(&self.manifest);
        v
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn manifest_value(config: &ScenarioConfig, extra: Option<Value>) -> Value {
    let config_value = config.to_value();
    let digest = sha256_hex(config_value.to_string().as_bytes());
    let mut manifest = json!({
        "tool": { "name": "tempologic", "version": env!("CARGO_PKG_VERSION") },
        "scenario": config.kind(),
        "length_unit": config.length_unit,
        "seed": config.seed,
        "config_sha256": digest,
        "config": config_value,
    });
    if let Some(Value::Object(extra)) = extra {
        let map = manifest.as_object_mut().expect("manifest object");
        for (k, v) in extra {
            map.insert(k, v);
        }
    }
    manifest
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::domain(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_table(path: &Path, table: &CsvTable, length_unit: &str, seed: u64) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# length_unit={length_unit} seed={seed}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in &table.rows {
        w.write_record(row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one computed output set under `out_dir`.
pub(crate) fn write_outputs(
    config: &ScenarioConfig,
    output: &ScenarioOutput,
    out_dir: &Path,
    manifest_extra: Option<Value>,
) -> Result<RunPaths> {
    fs::create_dir_all(out_dir)?;

    let trace_path = out_dir.join("trace.csv");
    let file = fs::File::create(&trace_path)?;
    write_trace_csv(file, &output.trace, &config.length_unit, config.seed)?;

    let summary_path = out_dir.join("summary.json");
    let mut summary = Map::new();
    summary.insert("scenario".to_string(), Value::from(config.kind()));
    summary.insert(
        "length_unit".to_string(),
        Value::from(config.length_unit.clone()),
    );
    summary.insert("seed".to_string(), Value::from(config.seed));
    if let Value::Object(fields) = &output.summary {
        for (k, v) in fields {
            summary.insert(k.clone(), v.clone());
        }
    }
    write_json(&summary_path, &Value::Object(summary))?;

    let mut table_paths = Vec::new();
    for table in &output.tables {
        let path = out_dir.join(&table.file_name);
        write_table(&path, table, &config.length_unit, config.seed)?;
        table_paths.push(path);
    }

    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest_value(config, manifest_extra))?;

    Ok(RunPaths {
        out_dir: out_dir.to_path_buf(),
        trace: trace_path,
        summary_json: summary_path,
        tables: table_paths,
        manifest: manifest_path,
    })
}

/// Runs the scenario and writes `trace.csv`, `summary.json`, the summary
/// tables and `manifest.json` under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunPaths> {
    let output = execute(config)?;
    write_outputs(config, &output, out_dir, None)
}
