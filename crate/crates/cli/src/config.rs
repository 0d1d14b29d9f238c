//! Optional key=value config file. Precedence is flags > config file >
//! built-in defaults; there are no environment variables, so a run is
//! reproducible from the command line alone.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use dpnls::error::{Error, Result};

#[derive(Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Domain(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::Domain(format!("config key {key} has unparseable value {raw:?}"))
            }),
        }
    }

    /// flag > config > default
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.parsed(key)?.unwrap_or(default)),
        }
    }

    /// flag > config, with no default: the caller treats None as "compute one".
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parsed(key),
        }
    }

    /// flag > config, required: exponents have no sensible defaults.
    pub fn require(&self, flag: Option<f64>, key: &str) -> Result<f64> {
        self.resolve_opt(flag, key)?
            .ok_or_else(|| Error::InvalidParams(format!("--{key} is required")))
    }
}
