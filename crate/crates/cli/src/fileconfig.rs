//! `key=value` scenario files: the same keys as the command-line flags,
//! with flags taking precedence. Lines starting with `#` and blank lines
//! are ignored.

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {} is not key=value", lineno + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Reject keys this command does not understand.
    pub fn allow_keys(&self, allowed: &[&str]) -> Result<(), String> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(format!("unknown config key `{key}`"));
            }
        }
        Ok(())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config value `{raw}` for `{key}` does not parse")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        self.parsed(key)
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>, String> {
        self.parsed(key)
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, String> {
        self.parsed(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        self.parsed(key)
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, String> {
        self.parsed(key)
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}
