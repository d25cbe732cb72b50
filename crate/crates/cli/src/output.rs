//! Output directories, CSV writing and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable that replaces the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PLATES_OUTPUT_DIR";

/// Round-trip exact scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Hex SHA-256 of the given bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `--out`, else the environment override, else `plates-out/<command>`.
pub fn resolve_dir(flag: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("plates-out").join(command),
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    parameters: &'a Value,
    version: &'a str,
    wall_time_s: f64,
    outputs: &'a [String],
}

/// Collects the files of one run and writes `manifest.json` last.
pub struct Run {
    dir: PathBuf,
    command: String,
    config_hash: String,
    parameters: Value,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn start(dir: PathBuf, command: &str, config_hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            command: command.to_string(),
            config_hash,
            parameters: Value::Null,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn set_parameters(&mut self, p: Value) {
        self.parameters = p;
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let m = RunManifest {
            command: &self.command,
            config_hash: &self.config_hash,
            parameters: &self.parameters,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: &self.outputs,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self.dir)
    }
}

/// `name_<value>` with a filesystem-friendly rendering of the value.
pub fn tagged(prefix: &str, v: f64, ext: &str) -> String {
    format!("{prefix}{v}.{ext}")
}
