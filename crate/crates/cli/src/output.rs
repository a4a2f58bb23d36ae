//! Output files: pretty JSON with a trailing newline and the run manifest.
//! Nothing time- or host-dependent is written, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{io_error, CliError, CliResult};

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, to_json(value)?).map_err(io_error(path))
}

/// Writes `value` to `path`, or to stdout when `path` is `None`.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(to_json(value)?.as_bytes()).map_err(io_error("<stdout>"))
        }
    }
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_error(path))
}

/// `run.json` in the directory of `out`.
pub fn default_manifest_path(out: &Path) -> PathBuf {
    out.with_file_name("run.json")
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config_file: Option<&'a Path>,
    pub parameters: &'a P,
    pub outputs: Vec<&'a Path>,
    pub notes: Vec<&'static str>,
}

impl<'a, P: Serialize> Manifest<'a, P> {
    pub fn new(command: &'static str, seed: u64, config_file: Option<&'a Path>, parameters: &'a P) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_file,
            parameters,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }
}
