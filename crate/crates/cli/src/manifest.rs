use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fragsim::engine::SimConfigFile;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything a run needs, resolved before any simulation starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config_path: Option<PathBuf>,
    pub configs: Vec<SimConfigFile>,
    pub suites: Vec<&'static str>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub replicas: Option<usize>,
    /// Subcommand settings not covered by a simulation config.
    pub settings: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_path: None,
            configs: Vec::new(),
            suites: Vec::new(),
            output_dir: None,
            seed,
            replicas: None,
            settings: serde_json::Map::new(),
        }
    }

    /// SHA-256 of the manifest with the two location fields cleared, so the
    /// digest names the content of a run rather than where it was written.
    pub fn digest(&self) -> String {
        let mut key = self.clone();
        key.config_path = None;
        key.output_dir = None;
        let bytes = serde_json::to_vec(&key).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn hash_line(&self) -> String {
        format!("# manifest sha256:{}\n", self.digest())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Writes `body` under `dir`, prefixed by the manifest hash line.
pub fn write_output(dir: &Path, name: &str, manifest: &RunManifest, body: &[u8]) -> io::Result<()> {
    let mut bytes = manifest.hash_line().into_bytes();
    bytes.extend_from_slice(body);
    fs::write(dir.join(name), bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_locations() {
        let mut a = RunManifest::new("verify", 7);
        a.suites = vec!["AC1"];
        let mut b = a.clone();
        b.output_dir = Some("/tmp/elsewhere".into());
        b.config_path = Some("c.json".into());
        assert_eq!(a.digest(), b.digest());
        b.seed = 8;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.hash_line().len(), "# manifest sha256:\n".len() + 64);
    }
}
