//! Run manifests: enough resolved configuration to reproduce a run
//! bit-exactly on the same build.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Crate version that produced the run.
    pub version: String,
    /// Fully resolved command specification (the `*Spec` structs).
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// SHA-256 hex digest per input file.
    pub input_digests: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(path: &Path) -> std::io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new<C: Serialize>(
        command: &str,
        config: &C,
        seed: Option<u64>,
        inputs: &[&Path],
        started_at: String,
    ) -> std::io::Result<Self> {
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            input_digests.insert(path.display().to_string(), sha256_hex(path)?);
        }
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("spec serialization cannot fail"),
            seed,
            input_digests,
            started_at,
            finished_at: String::new(),
        })
    }

    pub fn finish_and_write(mut self, dir: &Path) -> std::io::Result<()> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        let file = BufWriter::new(File::create(dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(file, &self).map_err(std::io::Error::other)
    }
}

pub fn read_manifest(path: &Path) -> std::io::Result<RunManifest> {
    let file = File::open(path)?;
    serde_json::from_reader(file).map_err(std::io::Error::other)
}
