//! Plain-text `key = value` configs.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys may
//! repeat only where the consumer allows it (scene tones).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: i + 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line,
            message: format!("{}: {}", self.key, message.into()),
        }
    }

    pub fn parse<T: std::str::FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e: T::Err| self.error(format!("cannot parse {:?}: {e}", self.value)))
    }

    pub fn parse_bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.error(format!("expected true or false, found {other:?}"))),
        }
    }

    pub fn parse_list<T: std::str::FromStr>(&self) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e: T::Err| self.error(format!("cannot parse {s:?}: {e}")))
            })
            .collect()
    }
}

/// Rejects a second occurrence of a single-valued key.
pub(crate) fn once<T>(slot: &mut Option<T>, entry: &Entry, value: T) -> Result<()> {
    if slot.is_some() {
        return Err(entry.error("duplicate key"));
    }
    *slot = Some(value);
    Ok(())
}
