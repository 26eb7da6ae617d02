//! On-disk formats. Every text format starts with a `# coachmine <kind> v1` magic line.

pub mod codebook;
pub mod features;
pub mod jsonl;
pub mod pose;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses whitespace-separated floats, expecting exactly `expected` of them.
pub(crate) fn parse_floats(line: &str, expected: usize, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, Some(lineno), e))?;
    if values.len() != expected {
        return Err(Error::format(
            path,
            Some(lineno),
            format!("expected {expected} values, got {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, Some(lineno), "non-finite value"));
    }
    Ok(values)
}

pub(crate) fn join_floats(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Splits a `key value key value …` header line into pairs.
pub(crate) fn header_fields<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<Vec<(&'a str, &'a str)>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() % 2 != 0 {
        return Err(Error::format(path, Some(lineno), "header must be key/value pairs"));
    }
    Ok(tokens.chunks(2).map(|c| (c[0], c[1])).collect())
}

pub(crate) fn header_value<T: std::str::FromStr>(
    fields: &[(&str, &str)],
    key: &str,
    path: &Path,
    lineno: usize,
) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::format(path, Some(lineno), format!("missing header field `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::format(path, Some(lineno), format!("bad value `{raw}` for `{key}`")))
}

pub(crate) fn expect_magic<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    magic: &str,
    path: &Path,
) -> Result<()> {
    match lines.next() {
        Some((_, line)) if line.trim_end() == magic => Ok(()),
        Some((n, line)) => Err(Error::format(path, Some(n), format!("expected `{magic}`, found `{line}`"))),
        None => Err(Error::format(path, None, "file is empty")),
    }
}

/// Numbered, non-blank lines.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}
