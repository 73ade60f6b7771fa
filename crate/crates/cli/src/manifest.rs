use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// What produced an artifact: command, configuration and input digests.
///
/// Inputs are keyed by role rather than path and timestamps are kept out,
/// so identical runs produce identical hashes.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
        })
    }

    /// Records the SHA-256 of a file, or of every file in a directory
    /// (names and contents, in sorted order).
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let digest = hash_path(path).with_context(|| format!("hashing {}", path.display()))?;
        self.inputs.insert(role.into(), digest);
        Ok(())
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialises");
        hex::encode(Sha256::digest(bytes))
    }

    /// Writes `<artifact>.manifest.json` and a `<artifact>.run.json` sidecar
    /// with the wall-clock time.
    pub fn write_beside(&self, artifact: &Path) -> Result<()> {
        let hash = self.hash();
        let body = serde_json::json!({ "manifest": self, "sha256": hash });
        fs::write(sidecar(artifact, "manifest.json"), serde_json::to_string_pretty(&body)? + "\n")?;
        let run = serde_json::json!({
            "manifest_sha256": hash,
            "finished_at": chrono::Utc::now().to_rfc3339(),
        });
        fs::write(sidecar(artifact, "run.json"), serde_json::to_string_pretty(&run)? + "\n")?;
        Ok(())
    }
}

fn sidecar(artifact: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    artifact.with_file_name(name)
}

fn hash_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            h.update(f.file_name().unwrap_or_default().to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(&f)?);
        }
    } else {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        h.update(&buf);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_paths_and_time() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        fs::write(&a, "same").unwrap();
        fs::write(&b, "same").unwrap();
        let mut m1 = RunManifest::new("x", Some(1), serde_json::json!({"k": 1})).unwrap();
        m1.input("corpus", &a).unwrap();
        let mut m2 = RunManifest::new("x", Some(1), serde_json::json!({"k": 1})).unwrap();
        m2.input("corpus", &b).unwrap();
        assert_eq!(m1.hash(), m2.hash());
        m2.seed = Some(2);
        assert_ne!(m1.hash(), m2.hash());
    }

    #[test]
    fn sidecars_written() {
        let dir = tempfile::tempdir().unwrap();
        let art = dir.path().join("model.json");
        let m = RunManifest::new("train", None, serde_json::json!({})).unwrap();
        m.write_beside(&art).unwrap();
        assert!(dir.path().join("model.json.manifest.json").exists());
        assert!(dir.path().join("model.json.run.json").exists());
    }
}
