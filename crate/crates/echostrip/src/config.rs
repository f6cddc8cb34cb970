//! Plain-text run configuration: `key = value` lines, `#` comments, later
//! assignments win.  Getters record which keys a command consumed and fill
//! in the defaults it chose, so a run can reject typos and echo the fully
//! resolved configuration into its manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct Settings {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Settings {
    pub fn empty() -> Self {
        Settings::default()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::Config(format!(
                "config file not found: {}",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path)?;
        let mut s = Settings::empty();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value, got {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            s.insert(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override must be key=value, got {kv:?}")))?;
        self.insert(k.trim(), v.trim())
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        {
            return Err(Error::Config(format!("bad key {key:?}")));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn mark(&mut self, key: &str) {
        self.used.insert(key.to_string());
    }

    pub fn get(&mut self, key: &str) -> Option<String> {
        self.mark(key);
        self.map.get(key).cloned()
    }

    pub fn require(&mut self, key: &str) -> Result<String> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> String {
        self.mark(key);
        match self.map.get(key) {
            Some(v) => v.clone(),
            None => {
                self.map.insert(key.to_string(), default.to_string());
                default.to_string()
            }
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(v) => parse_f64(key, &v),
            None => {
                self.map.insert(key.to_string(), format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            Some(v) => v
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("key {key}: bad count {v:?}: {e}"))),
            None => {
                self.map.insert(key.to_string(), format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("key {key}: bad integer {v:?}: {e}"))),
            None => {
                self.map.insert(key.to_string(), format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            Some(v) => parse_f64(key, &v).map(Some),
            None => Ok(None),
        }
    }

    pub fn path_opt(&mut self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&mut self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    /// Comma-separated list of numbers.
    pub fn list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            Some(v) => v
                .split(',')
                .map(|p| parse_f64(key, p.trim()))
                .collect::<Result<Vec<f64>>>(),
            None => {
                let rendered: Vec<String> = default.iter().map(|x| format!("{x}")).collect();
                self.map.insert(key.to_string(), rendered.join(","));
                Ok(default.to_vec())
            }
        }
    }

    /// Reject keys no getter asked about.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(|k| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }

    /// Fully resolved key/value pairs, defaults included.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.map.clone()
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| Error::Config(format!("key {key}: bad number {v:?}: {e}")))
}
