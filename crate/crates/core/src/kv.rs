//! Flat `key=value` text format. Keys are emitted in sorted order so the
//! rendered text of a map is canonical.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

pub type KvMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KvError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; whitespace around keys and values is trimmed.
pub fn parse(text: &str) -> Result<KvMap, KvError> {
    let mut map = KvMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(KvError::Syntax {
                line: i + 1,
                reason: format!("expected key=value, got {line:?}"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(KvError::Syntax {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(KvError::Syntax {
                line: i + 1,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

pub fn render(map: &KvMap) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Removes `key` and parses it, if present.
pub fn take<T>(map: &mut KvMap, key: &str) -> Result<Option<T>, KvError>
where
    T: FromStr,
    T::Err: Display,
{
    match map.remove(key) {
        None => Ok(None),
        Some(value) => value.parse::<T>().map(Some).map_err(|e| KvError::Invalid {
            key: key.to_string(),
            value,
            reason: e.to_string(),
        }),
    }
}

pub fn require<T>(map: &mut KvMap, key: &str) -> Result<T, KvError>
where
    T: FromStr,
    T::Err: Display,
{
    take(map, key)?.ok_or_else(|| KvError::Missing(key.to_string()))
}

/// Errors on the first leftover key.
pub fn reject_unknown(map: &KvMap) -> Result<(), KvError> {
    match map.keys().next() {
        Some(k) => Err(KvError::Unknown(k.clone())),
        None => Ok(()),
    }
}

/// Comma-separated list, empty string for an empty list.
pub fn join<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn split<T>(key: &str, value: &str) -> Result<Vec<T>, KvError>
where
    T: FromStr,
    T::Err: Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| {
            s.trim().parse::<T>().map_err(|e| KvError::Invalid {
                key: key.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}
