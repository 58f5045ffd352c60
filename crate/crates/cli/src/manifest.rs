//! Run manifests embedded in every output file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// sha256 of every file read, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Value, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            inputs: BTreeMap::new(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: 0.0,
        }
    }

    /// Reads `path`, recording its digest.
    pub fn read_input(&mut self, path: &Path) -> std::io::Result<String> {
        let bytes = std::fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// `body` prefixed with a `# manifest: {...}` comment line.
    pub fn csv(&self, body: &str) -> String {
        format!("# manifest: {}\n{body}", serde_json::to_string(self).expect("manifest serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The CSV body of a file written by [`RunManifest::csv`].
pub fn csv_body(text: &str) -> &str {
    match text.strip_prefix("# manifest: ") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_roundtrip() {
        let m = RunManifest::new("region", serde_json::json!({"a": 1}), Some(7));
        let text = m.csv("x,y\n1,2\n");
        assert!(text.starts_with("# manifest: {"));
        assert_eq!(csv_body(&text), "x,y\n1,2\n");
        assert_eq!(csv_body("x\n"), "x\n");
    }
}
