//! Layered settings: command-line flag, then `key=value` config file, then
//! built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use catcouple::io::read_text;
use catcouple::{Error, Result};

/// Keys a config file may set. Keys not used by the running subcommand are
/// ignored, so one file can serve several subcommands.
const KNOWN_KEYS: &[&str] = &[
    "input",
    "no_header",
    "label",
    "n_clusters",
    "mode",
    "learning_rate",
    "batch_size",
    "max_iterations",
    "delta",
    "seed",
    "beta1",
    "beta2",
    "epsilon",
    "kernels",
    "model",
    "embedding",
    "similarity",
    "trace",
    "out",
    "method",
    "restarts",
    "seeds",
    "k_list",
    "curve_steps",
    "baseline",
    "summary",
    "curve",
    "precision",
    "n_o",
    "n_a",
    "n_mv",
    "separation",
];

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    /// Resolved values, in resolution order, for provenance.
    effective: Vec<(String, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        Self::parse(&read_text(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("config line {}: expected key=value", n + 1)))?;
            let k = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(Error::config(format!("config line {}: unknown key {k:?}", n + 1)));
            }
            file.insert(k, v.trim().to_string());
        }
        Ok(Self {
            file,
            effective: Vec::new(),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| Error::config(format!("config key {key}: cannot parse {raw:?}: {e}")))
            })
            .transpose()
    }

    fn record(&mut self, key: &str, value: String) {
        self.effective.retain(|(k, _)| k != key);
        self.effective.push((key.to_string(), value));
    }

    /// Flag, else config file, else `None`.
    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v.to_string());
        }
        Ok(v)
    }

    /// Flag, else config file, else `default`.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Flag or config file; missing is a config error.
    pub fn req<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        self.opt(key, flag)?
            .ok_or_else(|| Error::config(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    /// A boolean switch: set by the flag, or by `key=true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.from_file::<bool>(key)?.unwrap_or(false);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn effective(&self) -> &[(String, String)] {
        &self.effective
    }

    /// The effective settings as one `key=value ...` line.
    pub fn echo_line(&self) -> String {
        self.effective
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_default() {
        let mut s = Settings::parse("seed = 5\n# comment\nmax-iterations=10\n").unwrap();
        assert_eq!(s.get("seed", Some(9u64), 0).unwrap(), 9);
        assert_eq!(s.get("max_iterations", None, 1000usize).unwrap(), 10);
        assert_eq!(s.get("batch_size", None, 20usize).unwrap(), 20);
        assert_eq!(s.echo_line(), "seed=9 max_iterations=10 batch_size=20");
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Settings::parse("colour=red\n").is_err());
        assert!(Settings::parse("seed\n").is_err());
        let mut s = Settings::parse("seed=abc\n").unwrap();
        assert!(s.get("seed", None, 0u64).is_err());
        assert!(s.req::<String>("input", None).is_err());
    }
}
