//! Run manifests and deterministic data emission: JSON reports, CSV tables
//! at full double precision, and SHA-256 digests for byte-exact comparison.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Result;

/// Everything needed to reproduce a CLI run and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration tree, after file merge and overrides.
    pub config: toml::Value,
    pub master_seed: u64,
    pub code_version: String,
    pub wall_time_s: f64,
    /// Relative output file name → SHA-256 hex digest.
    pub output_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: toml::Value, master_seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            master_seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            output_digests: BTreeMap::new(),
        }
    }
}

/// Format a float with 17 significant digits, enough to round-trip f64
/// exactly and keep golden comparisons meaningful.
pub fn format_full(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files for one run and records their digests.
pub struct OutputWriter {
    directory: PathBuf,
    digests: BTreeMap<String, String>,
}

impl OutputWriter {
    pub fn new(directory: &Path) -> Result<Self> {
        std::fs::create_dir_all(directory)?;
        Ok(Self {
            directory: directory.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    pub fn directory(&self) -> &Path {
        &self.directory
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.directory.join(name);
        let mut file = std::fs::File::create(&path)?;
        file.write_all(bytes)?;
        self.digests.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Write a CSV table; every cell is either a prepared string or a float
    /// rendered at full precision.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<CsvCell>]) -> Result<()> {
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(CsvCell::render).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.record(name, text.as_bytes())
    }

    /// Write a pretty-printed JSON document (serde preserves field order,
    /// so output is deterministic).
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| crate::Error::Config(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.record(name, text.as_bytes())
    }

    /// Write the manifest last so it can carry the other files' digests.
    pub fn finish(mut self, mut manifest: RunManifest, wall_time_s: f64) -> Result<RunManifest> {
        manifest.output_digests = self.digests.clone();
        manifest.wall_time_s = wall_time_s;
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| crate::Error::Config(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.record("manifest.json", text.as_bytes())?;
        Ok(manifest)
    }
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum CsvCell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Float(v) => format_full(*v),
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Text(s) => {
                if s.contains(',') || s.contains('"') || s.contains('\n') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }
}

impl From<f64> for CsvCell {
    fn from(v: f64) -> Self {
        CsvCell::Float(v)
    }
}

impl From<i64> for CsvCell {
    fn from(v: i64) -> Self {
        CsvCell::Int(v)
    }
}

impl From<&str> for CsvCell {
    fn from(v: &str) -> Self {
        CsvCell::Text(v.to_string())
    }
}

/// Digest of an existing file, for verification against a manifest.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips() {
        for v in [0.1, 1.0 / 3.0, 818.7546762e6, f64::MIN_POSITIVE, -2.85e6] {
            let s = format_full(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn writer_records_stable_digests() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str| -> String {
            let mut w = OutputWriter::new(dir.path()).unwrap();
            w.write_csv(
                name,
                &["a", "b"],
                &[vec![CsvCell::from(1.5), CsvCell::from("x,y")]],
            )
            .unwrap();
            w.digests[name].clone()
        };
        assert_eq!(write("t.csv"), write("t.csv"));
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(text.contains("\"x,y\""));
    }

    #[test]
    fn manifest_lists_all_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = OutputWriter::new(dir.path()).unwrap();
        w.write_json("data.json", &serde_json::json!({"k": 1})).unwrap();
        let manifest = RunManifest::new("test", toml::Value::Table(Default::default()), 7);
        let done = w.finish(manifest, 0.25).unwrap();
        assert!(done.output_digests.contains_key("data.json"));
        let on_disk = file_digest(&dir.path().join("data.json")).unwrap();
        assert_eq!(done.output_digests["data.json"], on_disk);
    }
}
