//! Flat key = value configuration with [section] headers.
//!
//! Keys live under the most recent section header as `section.key`; keys
//! before any header keep their bare name. `#` starts a comment. Every
//! runner declares the keys it understands and anything else is rejected,
//! so typos fail loudly instead of silently running defaults.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Context, Result};

#[derive(Clone, Debug, Default)]
pub struct Config {
    /// Raw text, echoed verbatim into every report.
    raw: String,
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .with_context(|| format!("line {}: unterminated section header", idx + 1))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    bail!("line {}: bad section name {name:?}", idx + 1);
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", idx + 1))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                bail!("line {}: bad key {key:?}", idx + 1);
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries.insert(full.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {full}", idx + 1);
            }
        }
        Ok(Config { raw: text.to_string(), entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).with_context(|| format!("config key {key} is required"))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| v.parse::<f64>().with_context(|| format!("config key {key}: bad number {v:?}")))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?;
        Ok(self.f64(key)?.unwrap())
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                // accept scientific notation for counts when it is exact
                if let Ok(n) = v.parse::<u64>() {
                    return Ok(n);
                }
                let f = v
                    .parse::<f64>()
                    .with_context(|| format!("config key {key}: bad integer {v:?}"))?;
                if f.fract() != 0.0 || !(0.0..=u64::MAX as f64).contains(&f) {
                    bail!("config key {key}: {v:?} is not a nonnegative integer");
                }
                Ok(f as u64)
            })
            .transpose()
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64(key)?.unwrap_or(default))
    }

    pub fn require_u64(&self, key: &str) -> Result<u64> {
        self.require(key)?;
        Ok(self.u64(key)?.unwrap())
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => bail!("config key {key}: bad boolean {v:?}"),
        }
    }

    /// Whitespace-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .with_context(|| format!("config key {key}: bad number {tok:?}"))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Keys of one section, in file-independent sorted order.
    pub fn section_keys(&self, section: &str) -> Vec<&str> {
        let prefix = format!("{section}.");
        self.entries
            .keys()
            .filter(|k| k.starts_with(&prefix))
            .map(String::as_str)
            .collect()
    }

    /// Indexed source descriptors: sources.source_1, sources.source_2, ...
    pub fn source_list(&self) -> Result<Vec<&str>> {
        let mut out = Vec::new();
        for i in 1.. {
            match self.get(&format!("sources.source_{i}")) {
                Some(v) => out.push(v),
                None => break,
            }
        }
        let declared = self.section_keys("sources").len();
        if declared != out.len() {
            bail!(
                "sources section holds {declared} keys but source_1..source_{} are contiguous; \
                 sources must be numbered without gaps",
                out.len()
            );
        }
        Ok(out)
    }

    /// Rejects any key outside the allowed set. Call once per runner with
    /// everything that runner understands.
    pub fn check_known(&self, allowed: &[&str]) -> Result<()> {
        let fixed: BTreeSet<&str> = allowed.iter().copied().collect();
        for key in self.entries.keys() {
            if fixed.contains(key.as_str()) {
                continue;
            }
            // numbered source entries are matched by pattern
            if let Some(rest) = key.strip_prefix("sources.source_") {
                if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                    continue;
                }
            }
            bail!("unknown config key {key} (known: {})", allowed.join(", "));
        }
        Ok(())
    }
}
