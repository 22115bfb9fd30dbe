//! Flat TOML config file. Keys mirror long flag names with `_` for `-`; a flag
//! given on the command line wins over the file, which wins over the default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "mode",
    "document_k",
    "query_k",
    "threshold",
    "thresholds",
    "top_n",
    "repetitions",
    "k",
    "sss_aggregation",
    "k1",
    "b",
    "docs",
    "vocab",
    "queries",
    "topics",
    "batch",
    "trials",
];

#[derive(Debug, Default)]
pub struct Config {
    table: toml::Table,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse()?;
        if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            bail!("unknown key {key:?} (known: {})", KNOWN_KEYS.join(", "));
        }
        Ok(Self { table })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.table
            .get(key)
            .map(|v| {
                v.clone()
                    .try_into()
                    .with_context(|| format!("config key {key:?}"))
            })
            .transpose()
    }

    /// `flag`, else the config value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_over_config_over_default() {
        let c = Config::parse("top_n = 5\nthresholds = [0.0, 0.5]\nmode = \"text\"").unwrap();
        assert_eq!(c.pick(None, "top_n", 10usize).unwrap(), 5);
        assert_eq!(c.pick(Some(3), "top_n", 10usize).unwrap(), 3);
        assert_eq!(c.pick(None, "query_k", 0usize).unwrap(), 0);
        assert_eq!(
            c.get::<Vec<f64>>("thresholds").unwrap(),
            Some(vec![0.0, 0.5])
        );
        assert_eq!(c.get::<String>("mode").unwrap().as_deref(), Some("text"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_types() {
        assert!(Config::parse("colour = 1").is_err());
        let c = Config::parse("top_n = \"many\"").unwrap();
        assert!(c.get::<usize>("top_n").is_err());
    }
}
