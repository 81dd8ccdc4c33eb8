use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// Provenance record written next to every set of outputs as flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command_line: String,
    pub subcommand: String,
    pub config_path: Option<String>,
    /// SHA-256 of the configuration bytes as loaded.
    pub config_digest: String,
    pub master_seed: u64,
    pub threads: usize,
    pub version: String,
    pub start_unix: u64,
    pub end_unix: u64,
    pub outputs: Vec<String>,
}

pub fn config_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &str| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("command_line", &self.command_line);
        kv("subcommand", &self.subcommand);
        kv("config_path", self.config_path.as_deref().unwrap_or("none"));
        kv("config_digest", &self.config_digest);
        kv("master_seed", &self.master_seed.to_string());
        kv("threads", &self.threads.to_string());
        kv("distleak_version", &self.version);
        kv("start_unix", &self.start_unix.to_string());
        kv("end_unix", &self.end_unix.to_string());
        kv("outputs", &self.outputs.join(","));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
