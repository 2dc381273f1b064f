//! Plain-text `key = value` configuration format.
//!
//! One assignment per line; `#` starts a comment (whole line or trailing);
//! blank lines are ignored. Keys are `[a-z0-9_.]` snake case. Values are
//! parsed on demand by the typed getters. Serialization emits keys in sorted
//! order so a document round-trips deterministically.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {ty}")]
    BadValue {
        key: String,
        value: String,
        ty: &'static str,
    },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

/// An ordered key-value document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    map: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| KvError::MalformedLine {
                line,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(KvError::MalformedLine {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            if map.contains_key(&key) {
                return Err(KvError::DuplicateKey { line, key });
            }
            map.insert(key, value);
        }
        Ok(Self { map })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// Overlay `other` onto `self`, later keys winning.
    pub fn merge(&mut self, other: &KvDoc) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, KvError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| KvError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                    ty: "f64",
                }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, KvError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| KvError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                    ty: "u64",
                }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, KvError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(KvError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                    ty: "bool",
                }),
            },
        }
    }

    /// Error if the document holds keys outside `allowed`; catches typos in
    /// hand-written configs.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), KvError> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(KvError::UnknownKey(k.clone()));
            }
        }
        Ok(())
    }
}
