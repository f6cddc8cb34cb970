//! Run manifests and report serialization.  Every run hashes its resolved
//! configuration; the hash is stamped into each artifact so a stray CSV can
//! always be traced back to the exact settings that produced it.  Nothing
//! here depends on wall-clock time, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub crate_version: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    /// Artifact file name -> sha256 of its final bytes.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        let mut canonical = String::new();
        for (k, v) in &config {
            canonical.push_str(k);
            canonical.push('=');
            canonical.push_str(v);
            canonical.push('\n');
        }
        RunManifest {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_hash: sha256_hex(canonical.as_bytes()),
            artifacts: BTreeMap::new(),
        }
    }

    /// Prepend the manifest hash to an artifact written by one of the CSV
    /// serializers, then record the stamped file.
    pub fn stamp(&mut self, path: &Path) -> Result<()> {
        let body = std::fs::read(path)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# manifest = {}", self.config_hash)?;
        f.write_all(&body)?;
        drop(f);
        self.record(path)
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.artifacts.insert(name, sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::Error::Invalid(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// JSON report wrapper: `{"manifest": hash, "report": payload}`.
pub fn write_json_report<T: Serialize>(path: &Path, manifest_hash: &str, payload: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapper<'a, T> {
        manifest: &'a str,
        report: &'a T,
    }
    let text = serde_json::to_string_pretty(&Wrapper {
        manifest: manifest_hash,
        report: payload,
    })
    .map_err(|e| crate::Error::Invalid(format!("report serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Plain numeric table with a manifest stamp and a header row.
pub fn write_table(
    path: &Path,
    manifest_hash: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# manifest = {manifest_hash}")?;
    writeln!(f, "{}", columns.join(","))?;
    for row in rows {
        let rendered: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", rendered.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hash_is_stable_and_stamping_prepends() {
        let mut cfg = BTreeMap::new();
        cfg.insert("dt".to_string(), "0.05".to_string());
        cfg.insert("problem".to_string(), "potential".to_string());
        let m1 = RunManifest::new("forward", cfg.clone());
        let m2 = RunManifest::new("forward", cfg);
        assert_eq!(m1.config_hash, m2.config_hash);
        assert_eq!(m1.config_hash.len(), 64);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let mut m = m1.clone();
        m.stamp(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# manifest = {}", m.config_hash)));
        assert!(text.ends_with("1,2\n"));
        assert!(m.artifacts.contains_key("table.csv"));
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
