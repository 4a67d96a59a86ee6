//! `key = value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

/// Config-file values plus a record of every setting actually used, so the
/// report can echo the effective configuration.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    effective: BTreeMap<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Self { file: parse_config(&text)?, effective: BTreeMap::new() })
    }

    /// Flag, then config file, then `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + serde::Serialize,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))?,
                None => default,
            },
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Like `get` with no default; absent keys stay absent.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + serde::Serialize,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn file_value(&self, key: &str) -> Option<&str> {
        self.file.get(key).map(String::as_str)
    }

    pub fn record<T: serde::Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.effective.insert(key.to_string(), v);
    }

    pub fn effective(&self) -> Value {
        Value::Object(self.effective.clone().into_iter().collect())
    }
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_dashes() {
        let m = parse_config("# header\n\nmax-iter = 50  # trailing\nlambda=0.5\n").unwrap();
        assert_eq!(m["max_iter"], "50");
        assert_eq!(m["lambda"], "0.5");
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn flags_beat_file_beats_default() {
        let mut s = Settings { file: parse_config("lambda = 0.5\nmax_iter = 7").unwrap(), ..Default::default() };
        assert_eq!(s.get("lambda", Some(0.9), 1.0).unwrap(), 0.9);
        assert_eq!(s.get("max_iter", None, 100usize).unwrap(), 7);
        assert_eq!(s.get("epsilon", None, 0.1).unwrap(), 0.1);
        assert_eq!(s.effective()["lambda"], 0.9);
        assert!(s.get::<usize>("lambda", None, 1).is_err());
    }
}
