//! Flat key = value config file support. Keys mirror the long flag names
//! (`epsilon-t`, `gamma`, `beta`, `q`, `frontier-cap`, `seed`,
//! `bucket-length`, `tables`, `abbrev`, `wordlist`, `overrides`, `kb`);
//! explicit flags override config values, which override the defaults.

use std::path::{Path, PathBuf};

use unischema::error::Error;

#[derive(Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = source
            .parse()
            .map_err(|e| Error::data(format!("config {}: {e}", path.display())))?;
        Ok(ConfigFile { table })
    }

    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.table.get(key)
    }

    fn bad(key: &str, want: &str) -> Error {
        Error::parameter(format!("config key {key:?} must be {want}"))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_integer()
                .filter(|&i| i >= 0)
                .map(|i| Some(i as u64))
                .ok_or_else(|| Self::bad(key, "a non-negative integer")),
        }
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>, Error> {
        Ok(self.u64(key)?.map(|v| v as u32))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, Error> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .map(Some)
                .ok_or_else(|| Self::bad(key, "a number")),
        }
    }

    pub fn path(&self, key: &str) -> Result<Option<PathBuf>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(PathBuf::from(s)))
                .ok_or_else(|| Self::bad(key, "a path string")),
        }
    }

    /// Accepts either a TOML array of integers or a comma-separated string.
    pub fn u32_list(&self, key: &str) -> Result<Option<Vec<u32>>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let i = item
                        .as_integer()
                        .filter(|&i| i >= 0)
                        .ok_or_else(|| Self::bad(key, "an array of non-negative integers"))?;
                    out.push(i as u32);
                }
                Ok(Some(out))
            }
            Some(toml::Value::String(s)) => {
                let mut out = Vec::new();
                for part in s.split(',') {
                    out.push(
                        part.trim()
                            .parse::<u32>()
                            .map_err(|_| Self::bad(key, "comma-separated integers"))?,
                    );
                }
                Ok(Some(out))
            }
            Some(_) => Err(Self::bad(key, "an array or comma-separated string")),
        }
    }
}
