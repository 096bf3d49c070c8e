//! `key = value` configuration files and flag/file/default resolution.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
}

/// Keys are flag names; `_` and `-` are interchangeable.
fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("config line {}: expected `key = value`", i + 1)));
            };
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), (value.trim().to_string(), i + 1)).is_some() {
                return Err(CliError::Config(format!("config key `{key}` given twice")));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Resolves each parameter as flag, then config file, then default, and
/// remembers which file keys were consumed so leftovers can be rejected.
pub struct Resolver {
    file: ConfigFile,
    used: RefCell<BTreeSet<String>>,
}

impl Resolver {
    pub fn new(file: Option<ConfigFile>) -> Self {
        Resolver {
            file: file.unwrap_or_default(),
            used: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.entries.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse().map(Some).map_err(|e| {
                CliError::Config(format!("invalid value for `{key}` (config line {line}): {e}"))
            }),
        }
    }

    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    /// A boolean switch: present flag, else the file value, else `false`.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        self.get(key, flag.then_some(true), false)
    }

    /// Rejects file keys that no parameter asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.file.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((key, (_, line))) => Err(CliError::Config(format!(
                "unknown config key `{key}` (config line {line})"
            ))),
            None => Ok(()),
        }
    }
}

/// Comma-separated list of numbers.
pub fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("invalid value for `{key}`: {e}")))
        })
        .collect()
}
