//! `key = value` configuration files.
//!
//! Keys are the long flag names without the leading dashes; `_` and `-` are
//! interchangeable. Blank lines and lines starting with `#` are ignored, and
//! values may be wrapped in double quotes.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let key = normalize(key);
            if key.is_empty() {
                bail!("line {}: empty key", n + 1);
            }
            let value = value.trim();
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            if values.insert(key.clone(), value.to_string()).is_some() {
                bail!("line {}: duplicate key {key}", n + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    /// Fails on keys outside `known`, so typos do not pass silently.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !known.iter().any(|k| normalize(k) == *key) {
                bail!("unknown config key {key}");
            }
        }
        Ok(())
    }

    /// The flag value if given, else the parsed config value, else `None`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key {key}: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c =
            ConfigFile::parse("# run\nleaf = 16\ngrid_count=10\n\nout = \"a b.csv\"\n").unwrap();
        assert_eq!(c.get("leaf"), Some("16"));
        assert_eq!(c.get("grid-count"), Some("10"));
        assert_eq!(c.get("out"), Some("a b.csv"));
        assert!(c.check_keys(&["leaf", "grid-count", "out"]).is_ok());
        assert!(c.check_keys(&["leaf"]).is_err());
    }

    #[test]
    fn flag_wins() {
        let c = ConfigFile::parse("leaf = 16").unwrap();
        assert_eq!(c.resolve(Some(8usize), "leaf").unwrap(), Some(8));
        assert_eq!(c.resolve(None::<usize>, "leaf").unwrap(), Some(16));
        assert_eq!(c.resolve(None::<usize>, "missing").unwrap(), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("leaf 16").is_err());
        assert!(ConfigFile::parse("leaf=1\nleaf=2").is_err());
        assert!(ConfigFile::parse("= 3").is_err());
        let c = ConfigFile::parse("leaf = x").unwrap();
        assert!(c.resolve(None::<usize>, "leaf").is_err());
    }
}
