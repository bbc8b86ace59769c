//! Parameter resolution: command-line flag, then the subcommand's table in
//! the config file, then the file's top level, then the built-in default.
//! Every resolved value is echoed into the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::CliError;

pub trait ConfigValue: Sized + Clone {
    fn from_toml(v: &Value) -> Option<Self>;
    fn to_json(&self) -> Json;
}

impl ConfigValue for f64 {
    fn from_toml(v: &Value) -> Option<Self> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

impl ConfigValue for usize {
    fn from_toml(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| usize::try_from(i).ok())
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

impl ConfigValue for u64 {
    fn from_toml(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| u64::try_from(i).ok())
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

impl ConfigValue for bool {
    fn from_toml(v: &Value) -> Option<Self> {
        v.as_bool()
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

impl ConfigValue for String {
    fn from_toml(v: &Value) -> Option<Self> {
        v.as_str().map(str::to_owned)
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

impl ConfigValue for Vec<f64> {
    fn from_toml(v: &Value) -> Option<Self> {
        v.as_array()?.iter().map(f64::from_toml).collect()
    }

    fn to_json(&self) -> Json {
        serde_json::json!(self)
    }
}

pub struct Settings {
    section: String,
    table: toml::Table,
    echo: BTreeMap<String, Json>,
}

impl Settings {
    pub fn load(path: Option<&Path>, section: &str) -> Result<Self, CliError> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Ok(Self { section: section.to_owned(), table, echo: BTreeMap::new() })
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        self.table
            .get(&self.section)
            .and_then(|s| s.as_table())
            .and_then(|s| s.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    fn from_file<T: ConfigValue>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.lookup(key) {
            None => Ok(None),
            Some(v) => T::from_toml(v)
                .map(Some)
                .ok_or_else(|| CliError::Usage(format!("config key `{key}` has the wrong type: {v}"))),
        }
    }

    pub fn get<T: ConfigValue>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.echo.insert(key.to_owned(), v.to_json());
        Ok(v)
    }

    pub fn get_opt<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(x) = &v {
            self.echo.insert(key.to_owned(), x.to_json());
        }
        Ok(v)
    }

    pub fn echo(&self) -> &BTreeMap<String, Json> {
        &self.echo
    }

    /// SHA-256 of the canonical JSON of the resolved parameters.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.echo).unwrap();
        sha256_hex(text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "b = 2.0\nn = 64\n[evolve]\nb = 3\n").unwrap();
        let mut s = Settings::load(Some(&path), "evolve").unwrap();
        assert_eq!(s.get("b", None, 1.0).unwrap(), 3.0);
        assert_eq!(s.get("n", None, 8usize).unwrap(), 64);
        assert_eq!(s.get("n", Some(128usize), 8).unwrap(), 128);
        assert_eq!(s.get("dtau", None, 0.5).unwrap(), 0.5);
        let mut other = Settings::load(Some(&path), "profile").unwrap();
        assert_eq!(other.get("b", None, 1.0).unwrap(), 2.0);
        assert!(other.get::<bool>("n", None, false).is_err());
    }

    #[test]
    fn hash_depends_on_values_only() {
        let mut a = Settings::load(None, "x").unwrap();
        let mut b = Settings::load(None, "y").unwrap();
        a.get("t", Some(0.5), 0.0).unwrap();
        b.get("t", None, 0.5).unwrap();
        assert_eq!(a.hash(), b.hash());
        b.get("u", None, 1usize).unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
