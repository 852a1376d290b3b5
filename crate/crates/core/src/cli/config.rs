use std::path::{Path, PathBuf};

use crate::error::{bail, Result};
use crate::kvtext::KvText;

pub const RESOLVED_FILE: &str = "config.resolved";

/// Effective settings of one command: defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: KvText,
    pub out: PathBuf,
}

/// Keys a command accepts: `(key, default)` pairs plus keys with no default.
pub struct KeySet {
    pub defaults: &'static [(&'static str, &'static str)],
    pub optional: &'static [&'static str],
}

impl KeySet {
    fn allows(&self, key: &str) -> bool {
        self.defaults.iter().any(|(k, _)| *k == key) || self.optional.contains(&key)
    }
}

impl RunConfig {
    pub fn resolve(command: &str, keys: &KeySet, file: Option<&Path>, flags: &KvText) -> Result<Self> {
        let mut values = KvText::new();
        for (k, v) in keys.defaults {
            values.set(k, v);
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| crate::Error::Configuration(format!("{}: {e}", path.display())))?;
            let parsed = KvText::parse(&text)?;
            check_keys(command, keys, &parsed)?;
            values.overlay(&parsed);
        }
        check_keys(command, keys, flags)?;
        values.overlay(flags);
        let out = PathBuf::from(values.require("out")?);
        Ok(Self {
            command: command.to_string(),
            values,
            out,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).filter(|v| !v.is_empty())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.set(key, value);
    }

    /// Creates the output directory and writes `config.resolved` into it.
    pub fn write_resolved(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let text = format!("# pcvae {}\n{}", self.command, self.values.to_text());
        std::fs::write(self.out.join(RESOLVED_FILE), text)?;
        Ok(())
    }
}

fn check_keys(command: &str, keys: &KeySet, kv: &KvText) -> Result<()> {
    if let Some(k) = kv.keys().find(|k| !keys.allows(k)) {
        bail!(Configuration, "`{command}` does not take the setting {k:?}");
    }
    Ok(())
}
