//! Run manifest: what was run, with which resolved config, producing which
//! files.

use crate::config::Config;
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Config after flag overrides and path resolution.
    pub config: Config,
    /// Flags that overrode config fields, by field path.
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

/// Collects outputs of one run and writes its manifest last.
pub struct Run {
    pub out: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    pub fn new(command: &str, out: &Path, config: Config) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config,
                overrides: BTreeMap::new(),
                seeds: Vec::new(),
                outputs: Vec::new(),
                started_unix,
                wall_clock_seconds: 0.0,
            },
            start: Instant::now(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.manifest.config
    }

    pub fn set_overrides(&mut self, overrides: BTreeMap<String, serde_json::Value>) {
        self.manifest.overrides = overrides;
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    /// Writes `bytes` to `out/name` and records the file.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        let name = format!("{}.manifest.json", self.manifest.command);
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Output(e.to_string()))?;
        let path = self.out.join(name);
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}
