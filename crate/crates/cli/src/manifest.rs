use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize)]
pub struct Counters {
    pub solves: usize,
    pub tracked_particles: usize,
    pub rejections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command. Only `workers` and
/// `wall_time_s` may differ between reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub args: serde_json::Value,
    pub inputs: Vec<InputFile>,
    /// SHA-256 over the command, its arguments and the input file contents.
    pub config_hash: String,
    pub counters: Counters,
    pub outputs: Vec<String>,
    pub workers: usize,
    pub wall_time_s: f64,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new<A: Serialize>(command: &str, seed: u64, args: &A, inputs: &[&Path]) -> Result<Self> {
        let args = serde_json::to_value(args)?;
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputFile {
                    path: p.to_path_buf(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(serde_json::to_string(&args)?.as_bytes());
        for f in &inputs {
            h.update([0]);
            h.update(f.sha256.as_bytes());
        }
        Ok(Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: seed,
            args,
            inputs,
            config_hash: hex(&h.finalize()),
            counters: Counters::default(),
            outputs: Vec::new(),
            workers: 1,
            wall_time_s: 0.0,
        })
    }
}
