//! Flat `key = value` configuration files with one section per
//! experiment. Command-line flags override file values; the merged result
//! is echoed into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::CliError;

/// Key-value settings, namespaced as `section.key`.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got `{}`", lineno + 1, line))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{}.{}", section, key)
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.values.insert(format!("{}.{}", section, key), value.to_string());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&format!("{}.{}", section, key)).map(String::as_str)
    }

    pub fn get_str<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn get_parsed<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                CliError::Config(format!("{}.{}: cannot parse `{}`", section, key, s))
            }),
        }
    }

    /// Comma-separated seed list; `--seed` overrides with a single entry.
    pub fn seeds(&self, section: &str, default: &[u64]) -> Result<Vec<u64>, CliError> {
        match self.get(section, "seeds") {
            None => Ok(default.to_vec()),
            Some(s) => {
                let seeds: Result<Vec<u64>, _> =
                    s.split(',').map(|t| t.trim().parse::<u64>()).collect();
                let seeds = seeds.map_err(|_| {
                    CliError::Config(format!("{}.seeds: cannot parse `{}`", section, s))
                })?;
                if seeds.is_empty() {
                    return Err(CliError::Config(format!("{}.seeds: empty list", section)));
                }
                Ok(seeds)
            }
        }
    }

    /// Echo every effective value, sorted, for provenance.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Worker-count override from the environment, applied to every trainer.
pub fn worker_count() -> usize {
    std::env::var("E2GN2_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}
