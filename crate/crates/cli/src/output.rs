//! Result files: JSON with an embedded metadata block, CSV point lists and a
//! per-command manifest with checksums.

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "powergame";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output. No timestamps, so reruns are
/// byte-identical.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: ExperimentConfig,
}

impl Metadata {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Metadata {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            config_sha256: config.sha256(),
            seeds: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.into(), value);
        self
    }
}

/// Shortest decimal string that parses back to the same `f64`: plain
/// notation for magnitudes in `[1e-5, 1e16)`, scientific otherwise. Negative
/// zero prints as `0`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV text with a header line and one line per row.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn point_csv(points: &[[f64; 2]]) -> String {
    csv(&["u1", "u2"], points.iter().map(|p| vec![fmt_f64(p[0]), fmt_f64(p[1])]))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects the files of one command run and writes them with a manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: BTreeMap<String, String>,
    written: Vec<PathBuf>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSet { dir: dir.to_path_buf(), files: BTreeMap::new(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)?;
        self.files.insert(name.into(), sha256_hex(text.as_bytes()));
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON of `body` (an object) with a `metadata` key added.
    pub fn write_json<T: Serialize>(&mut self, name: &str, metadata: &Metadata, body: &T) -> CliResult<PathBuf> {
        let mut value = serde_json::Map::new();
        value.insert("metadata".into(), serde_json::to_value(metadata).expect("metadata serializes"));
        match serde_json::to_value(body).expect("results serialize") {
            serde_json::Value::Object(m) => value.extend(m),
            other => {
                value.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(value)).expect("json");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `manifest.json` listing every file with its checksum.
    pub fn finish<T: Serialize>(mut self, metadata: &Metadata, parameters: &T) -> CliResult<Vec<PathBuf>> {
        #[derive(Serialize)]
        struct Manifest<'a, P: Serialize> {
            metadata: &'a Metadata,
            parameters: &'a P,
            files: &'a BTreeMap<String, String>,
        }
        let files = self.files.clone();
        let m = Manifest { metadata, parameters, files: &files };
        let mut text = serde_json::to_string_pretty(&m).expect("json");
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text)?;
        self.written.push(path);
        Ok(self.written)
    }
}
