use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use qbsde_core::report::to_json_line;

use crate::config::ExperimentConfig;
use crate::CliError;

/// SHA-256 of the materialized config in its canonical JSON form.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = to_json_line(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'a str,
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct ConfigBody<'a> {
    config: &'a ExperimentConfig,
}

/// JSONL sink that stamps the config hash and seed on every record.
pub struct Jsonl {
    out: Box<dyn Write>,
    hash: String,
    seed: u64,
}

impl Jsonl {
    /// Writes to `path`, or to stdout when absent, starting with the config record.
    pub fn open(path: Option<&Path>, config: &ExperimentConfig) -> Result<Self, CliError> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(create(p)?),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        let mut sink = Self {
            out,
            hash: config_hash(config),
            seed: config.seed,
        };
        sink.write("config", &ConfigBody { config })?;
        Ok(sink)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn write<T: Serialize>(&mut self, record: &str, body: &T) -> Result<(), CliError> {
        let line = to_json_line(&Tagged {
            record,
            config_hash: &self.hash,
            seed: self.seed,
            body,
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Creates `path` and any missing parent directories.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err)
}
