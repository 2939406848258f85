//! Layered key=value configuration.
//!
//! Values arrive from three places, later ones overriding earlier:
//! a `--config` file of `key = value` lines, repeatable `--set key=value`
//! flags, and the subcommand's own named flags. Every command declares the
//! keys it understands; anything else in the merged table is rejected
//! before any computation starts, as is a malformed value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::Failure;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Merge the three layers. `flags` carries the subcommand's named
    /// options as `(key, present-or-not)` pairs.
    pub fn load(
        file: Option<&Path>,
        sets: &[String],
        flags: &[(&str, Option<String>)],
    ) -> Result<Config, Failure> {
        let mut config = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            config.merge_file(&text, path)?;
        }
        for entry in sets {
            let (key, value) = split_pair(entry)
                .ok_or_else(|| Failure::Config(format!("--set needs key=value, got '{entry}'")))?;
            config.values.insert(key.to_string(), value.to_string());
        }
        for (key, value) in flags {
            if let Some(value) = value {
                config.values.insert(key.to_string(), value.clone());
            }
        }
        Ok(config)
    }

    fn merge_file(&mut self, text: &str, path: &Path) -> Result<(), Failure> {
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_pair(line).ok_or_else(|| {
                Failure::Config(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    index + 1
                ))
            })?;
            if self.values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Failure::Config(format!(
                    "{}:{}: duplicate key '{key}'",
                    path.display(),
                    index + 1
                )));
            }
        }
        Ok(())
    }

    /// Reject keys no command reads; typo protection for sweep scripts.
    pub fn ensure_known(&self, known: &[&str]) -> Result<(), Failure> {
        let mut unknown: Vec<&str> =
            self.values.keys().map(String::as_str).filter(|k| !known.contains(k)).collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort_unstable();
        let mut message = format!("unknown config key(s): {}", unknown.join(", "));
        let _ = write!(message, " (this command accepts: {})", known.join(", "));
        Err(Failure::Config(message))
    }

    /// The resolved table, for the reproducibility header.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn str(&self, key: &str, default: &str) -> String {
        self.values.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, Failure> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => parse_f64(key, raw),
        }
    }

    /// A float that may also be spelled `inf` (infinite inverse
    /// temperature, i.e. zero temperature).
    pub fn beta(&self, key: &str, default: f64) -> Result<f64, Failure> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(default),
            Some("inf") => Ok(f64::INFINITY),
            Some(raw) => parse_f64(key, raw),
        }
    }

    /// Absent key means "derive the value"; present means "use this".
    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, Failure> {
        self.values.get(key).map(|raw| parse_f64(key, raw)).transpose()
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, Failure> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Failure::Config(format!("key '{key}' needs a non-negative integer, got '{raw}'"))
            }),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, Failure> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Failure::Config(format!("key '{key}' needs a non-negative integer, got '{raw}'"))
            }),
        }
    }

    /// A strictly increasing size list: comma-separated entries, each a
    /// plain integer or an inclusive `a..b` range.
    pub fn sizes(&self, key: &str, default: &str) -> Result<Vec<usize>, Failure> {
        let raw = self.str(key, default);
        let mut sizes = Vec::new();
        for entry in raw.split(',') {
            let entry = entry.trim();
            if entry.is_empty() {
                return Err(Failure::Config(format!("key '{key}': empty entry in '{raw}'")));
            }
            match entry.split_once("..") {
                Some((lo, hi)) => {
                    let lo = parse_usize(key, lo.trim())?;
                    let hi = parse_usize(key, hi.trim())?;
                    if hi < lo {
                        return Err(Failure::Config(format!(
                            "key '{key}': range {lo}..{hi} runs backwards"
                        )));
                    }
                    sizes.extend(lo..=hi);
                }
                None => sizes.push(parse_usize(key, entry)?),
            }
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Failure::Config(format!(
                "key '{key}': sizes must be strictly increasing, got '{raw}'"
            )));
        }
        Ok(sizes)
    }
}

fn split_pair(raw: &str) -> Option<(&str, &str)> {
    let (key, value) = raw.split_once('=')?;
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() || value.is_empty() {
        return None;
    }
    Some((key, value))
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, Failure> {
    let value: f64 = raw
        .parse()
        .map_err(|_| Failure::Config(format!("key '{key}' needs a number, got '{raw}'")))?;
    if !value.is_finite() {
        return Err(Failure::Config(format!("key '{key}' must be finite, got '{raw}'")));
    }
    Ok(value)
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, Failure> {
    raw.parse().map_err(|_| {
        Failure::Config(format!("key '{key}' needs a non-negative integer, got '{raw}'"))
    })
}
