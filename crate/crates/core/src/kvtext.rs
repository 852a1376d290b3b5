//! `key = value` text: one pair per line, `#` starts a comment, blank lines ignored.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{bail, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvText {
    entries: BTreeMap<String, String>,
}

impl KvText {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!(Configuration, "line {}: expected `key = value`, got {line:?}", n + 1);
            };
            let key = k.trim();
            if key.is_empty() {
                bail!(Configuration, "line {}: empty key", n + 1);
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                bail!(Configuration, "line {}: duplicate key {key:?}", n + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Copies every entry of `other` over this one.
    pub fn overlay(&mut self, other: &KvText) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        match self.get(key) {
            Some(v) => Ok(v),
            None => bail!(Configuration, "missing key {key:?}"),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| crate::Error::Configuration(format!("bad value {v:?} for {key:?}"))),
        }
    }

    pub fn parse_req<T: FromStr>(&self, key: &str) -> Result<T> {
        match self.parse_opt(key)? {
            Some(v) => Ok(v),
            None => bail!(Configuration, "missing key {key:?}"),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let kv = KvText::parse("# top\n epochs = 5 \nlr=0.001 # trailing\n\n").unwrap();
        assert_eq!(kv.parse_req::<usize>("epochs").unwrap(), 5);
        assert_eq!(kv.parse_req::<f64>("lr").unwrap(), 0.001);
        assert_eq!(KvText::parse(&kv.to_text()).unwrap(), kv);
        assert!(kv.parse_req::<usize>("lr").is_err());
        assert!(kv.parse_req::<usize>("missing").is_err());
        assert!(KvText::parse("novalue\n").is_err());
        assert!(KvText::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn overlay_wins() {
        let mut base = KvText::parse("a = 1\nb = 2\n").unwrap();
        base.overlay(&KvText::parse("b = 3\n").unwrap());
        assert_eq!(base.get("b"), Some("3"));
        assert_eq!(base.get("a"), Some("1"));
    }

    #[test]
    fn float_text_is_exact() {
        let mut kv = KvText::new();
        let x = 0.1f64 + 0.2;
        kv.set("x", x);
        assert_eq!(KvText::parse(&kv.to_text()).unwrap().parse_req::<f64>("x").unwrap().to_bits(), x.to_bits());
    }
}
