//! Run manifest: the effective configuration, seed, crate version and input
//! checksums, written alongside every subcommand's outputs.
//!
//! The manifest contains no timestamps, so a rerun with identical inputs and
//! configuration produces a byte-identical file.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use pcmnn::{Error, Result};

pub struct Manifest {
    subcommand: &'static str,
    inputs: Vec<(String, String)>,
    extra: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &'static str) -> Self {
        Manifest {
            subcommand,
            inputs: Vec::new(),
            extra: Vec::new(),
        }
    }

    /// Record an input file with its SHA-256 checksum.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::data(format!("cannot read input {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push((path.display().to_string(), hex));
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, out_dir: &Path, config: &RunConfig) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "pcmnn-manifest v1");
        let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "subcommand = {}", self.subcommand);
        for (k, v) in &self.extra {
            let _ = writeln!(text, "{k} = {v}");
        }
        for (path, digest) in &self.inputs {
            let _ = writeln!(text, "input {path} sha256={digest}");
        }
        let _ = writeln!(text, "[config]");
        for (k, v) in config.snapshot() {
            let _ = writeln!(text, "{k} = {v}");
        }
        std::fs::write(out_dir.join("manifest.txt"), text).map_err(Error::from)
    }
}
