//! Run manifest: a JSON audit record of what ran, from which inputs, and
//! how long it took.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

/// Fields of `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub action: String,
    pub seed: u64,
    /// SHA-256 of the scenario text as given (pre-resolution).
    pub input_sha256: String,
    /// SHA-256 of the resolved configuration echo.
    pub resolved_sha256: String,
    pub versions: Versions,
    pub timings_s: Timings,
    /// Artifact file names in emission order, relative to the output
    /// directory.
    pub artifacts: Vec<String>,
    /// Non-fatal issues (coherence-budget overruns, plot failures).
    pub warnings: Vec<String>,
    /// Observables of the initial state for runs that record trajectories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_obs: Option<InitialObservables>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub adpulse_core: String,
    pub adpulse_cli: String,
}

impl Versions {
    pub fn current() -> Versions {
        // Both crates share the workspace version.
        Versions {
            adpulse_core: env!("CARGO_PKG_VERSION").to_string(),
            adpulse_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub parse: f64,
    pub run: f64,
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct InitialObservables {
    pub coherence: f64,
    pub polarization: f64,
    pub m_z: f64,
    pub purity: f64,
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Write the manifest as pretty JSON.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| crate::CliError::Io(format!("cannot serialize manifest: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_the_reference_vector() {
        // SHA-256 of the empty string.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
