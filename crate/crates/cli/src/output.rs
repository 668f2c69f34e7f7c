// SPDX-License-Identifier: MIT OR Apache-2.0

//! Output files. Every CSV starts with a `# config_hash=… seed=…` comment
//! line and every JSON document carries the same pair in a `manifest` field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    hash: String,
    seed: u64,
    command: String,
    written: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, hash: String, seed: u64, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            seed,
            command: command.to_string(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> Value {
        json!({ "config_hash": self.hash, "seed": self.seed, "command": self.command })
    }

    pub fn csv<S: AsRef<str>>(&mut self, name: &str, header: &[S], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut text = format!("# config_hash={} seed={}\n", self.hash, self.seed);
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Data(e.to_string());
        w.write_record(header.iter().map(AsRef::as_ref)).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        self.write(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), CliError> {
        let doc = json!({ "manifest": self.manifest(), "data": data });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing the config and every file produced.
    pub fn finish<T: Serialize>(mut self, config: &T) -> Result<(), CliError> {
        let mut files = self.written.clone();
        files.sort();
        let doc = json!({ "manifest": self.manifest(), "config": config, "files": files });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write("manifest.json", text.as_bytes())
    }
}

pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
