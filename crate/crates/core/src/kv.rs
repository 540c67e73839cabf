//! Plain-text `section.key = value` configuration maps.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys are unique. Values are kept as strings and typed on lookup.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key `{key}`", lineno + 1)));
            }
            if map.entries.contains_key(key) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            map.entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(map)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Typed lookup; a missing key yields `None`, an unparsable one an error.
    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key} = {raw}`"))),
        }
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) if raw.trim().is_empty() => Ok(Some(Vec::new())),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("cannot parse list `{key} = {raw}`")))
                })
                .collect::<Result<Vec<V>>>()
                .map(Some),
        }
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown<'a>(&self, allowed: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let allowed: Vec<&str> = allowed.into_iter().collect();
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown configuration key `{k}`"))),
            None => Ok(()),
        }
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &KvMap) -> KvMap {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

impl fmt::Display for KvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn join_list<V: ToString>(items: &[V]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let m = KvMap::parse("# header\ntrain.iterations = 30 # steps\n\ndata.k=4\nlist = 1, 2,3\n")
            .unwrap();
        assert_eq!(m.get::<u64>("train.iterations").unwrap(), Some(30));
        assert_eq!(m.get::<usize>("data.k").unwrap(), Some(4));
        assert_eq!(m.get_list::<usize>("list").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(m.get::<u64>("missing").unwrap(), None);
        assert!(m.get::<u64>("data.k").is_ok());
        assert!(KvMap::parse("a = 1\na = 2").is_err());
        assert!(KvMap::parse("no equals sign").is_err());
    }

    #[test]
    fn unknown_keys_rejected_with_name() {
        let m = KvMap::parse("train.iteratons = 3").unwrap();
        let err = m.reject_unknown(["train.iterations"]).unwrap_err();
        assert!(err.to_string().contains("train.iteratons"));
    }

    #[test]
    fn display_round_trip() {
        let m = KvMap::parse("b = 2\na = x y").unwrap();
        assert_eq!(KvMap::parse(&m.to_string()).unwrap(), m);
    }
}
