//! Run manifests and atomic file output.
//!
//! Every CLI command writes a manifest next to its outputs echoing the
//! fully resolved configuration, including all seeds, so a run can be
//! reproduced bitwise from the manifest alone.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            artifacts: Vec::new(),
        }
    }

    pub fn add_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new("generate", serde_json::json!({"seed": 7}));
        m.add_artifact(Path::new("out/edges.txt"));
        let parsed: RunManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(parsed.command, "generate");
        assert_eq!(parsed.artifacts, vec!["out/edges.txt"]);
        assert_eq!(parsed.config["seed"], 7);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert!(!path.with_extension("csv.tmp").exists());
    }
}
