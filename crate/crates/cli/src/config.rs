//! Flat key-value config files and flag/config/default resolution.
//!
//! The format is one `key = value` pair per line; `#` starts a comment and
//! blank lines are skipped. Keys are the long flag names, with hyphens and
//! underscores interchangeable. An explicit flag always overrides the
//! config entry of the same name, and built-in defaults apply only when
//! neither is present. Every key must belong to the running command, so a
//! typo in a config file fails loudly instead of silently falling back to
//! a default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ddcs_core::{Error, Result};

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

/// A loaded config file plus the bookkeeping needed to reject unknown keys.
#[derive(Debug)]
pub struct Resolver {
    entries: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Resolver {
    /// Loads `path` when given; an absent path resolves everything from
    /// flags and defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::cannot_open(path, e))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = match raw.find('#') {
                    Some(pos) => &raw[..pos],
                    None => raw,
                };
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::InvalidInput(format!("config line {}: expected key = value", idx + 1))
                })?;
                let key = normalize(key.trim());
                if key.is_empty() {
                    return Err(Error::InvalidInput(format!("config line {}: empty key", idx + 1)));
                }
                if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                    return Err(Error::InvalidInput(format!(
                        "config line {}: duplicate key {key}",
                        idx + 1
                    )));
                }
            }
        }
        Ok(Resolver { entries, used: BTreeSet::new() })
    }

    /// The value for `key`: the flag when given, otherwise the parsed
    /// config entry, otherwise `None`. Also registers `key` as one this
    /// command understands.
    pub fn value<T>(&mut self, flag: Option<T>, key: &'static str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let norm = normalize(key);
        self.used.insert(norm.clone());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(&norm) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::InvalidInput(format!("config key {key}: {e}"))),
        }
    }

    /// Like [`Resolver::value`] but with no default to fall back on.
    pub fn require<T>(&mut self, flag: Option<T>, key: &'static str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.value(flag, key)?.ok_or_else(|| {
            Error::InvalidInput(format!(
                "missing --{} (give the flag or a config entry)",
                key.replace('_', "-")
            ))
        })
    }

    /// Rejects config entries no [`Resolver::value`] call claimed.
    pub fn finish(self) -> Result<()> {
        for key in self.entries.keys() {
            if !self.used.contains(key) {
                return Err(Error::InvalidInput(format!("unknown config key {key}")));
            }
        }
        Ok(())
    }
}
