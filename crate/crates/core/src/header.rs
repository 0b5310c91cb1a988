//! `key=value` text headers stored next to `DBOF` matrices.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub struct Header {
    entries: BTreeMap<String, String>,
    origin: std::path::PathBuf,
}

pub fn write(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {} is not key=value", i + 1),
        })?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(Header {
        entries,
        origin: path.to_path_buf(),
    })
}

impl Header {
    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.entries.get(key).map(String::as_str).ok_or_else(|| Error::Format {
            path: self.origin.clone(),
            message: format!("missing header key '{key}'"),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.get_str(key)?;
        raw.parse().map_err(|e: T::Err| Error::Format {
            path: self.origin.clone(),
            message: format!("bad value '{raw}' for '{key}': {e}"),
        })
    }
}
