//! Run manifest, written before any other output of a command.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every setting of the run, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Core(fairlink::Error::Io { path: path.into(), source: e }))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Digests of a file, or of every regular file in a directory in name
/// order. Missing paths are skipped.
pub fn digest_inputs(paths: &[&Path]) -> CliResult<Vec<InputDigest>> {
    let mut out = Vec::new();
    for &path in paths {
        let mut files = Vec::new();
        if path.is_dir() {
            let entries = fs::read_dir(path).map_err(|e| CliError::Core(fairlink::Error::Io { path: path.into(), source: e }))?;
            for entry in entries.flatten() {
                if entry.path().is_file() {
                    files.push(entry.path());
                }
            }
            files.sort();
        } else if path.is_file() {
            files.push(path.to_path_buf());
        }
        for f in files {
            out.push(InputDigest { path: f.display().to_string(), sha256: sha256_file(&f)? });
        }
    }
    Ok(out)
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        let io = |e| CliError::Core(fairlink::Error::Io { path: out_dir.into(), source: e });
        fs::create_dir_all(out_dir).map_err(io)?;
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(out_dir.join(MANIFEST_FILE), text).map_err(io)
    }
}
