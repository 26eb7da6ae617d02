//! Line-delimited JSON: one record per line, blank lines ignored.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{read_text, write_text};
use crate::error::{Error, Result};

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse(&read_text(path)?, path)
}

pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, Some(i + 1), e)))
        .collect()
}

pub fn to_string<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_text(path, &to_string(records))
}
