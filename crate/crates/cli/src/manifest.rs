use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What produced an output: written next to it so the run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub config: C,
    pub inputs: Vec<InputDigest>,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, config: C, inputs: &[&Path]) -> Result<Self, Failure> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p)?;
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<_, Failure>>()?;
        Ok(RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `out.csv` -> `out.manifest.json`, next to a single-file output.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}
