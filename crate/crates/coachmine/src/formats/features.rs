//! Precomputed video feature files: `# coachmine features v1`, a `vectors N dim D` header,
//! then one D-dimensional vector per line.

use std::path::Path;

use coachmine_core::pairing::FeatureSet;

use super::{expect_magic, header_fields, header_value, join_floats, numbered_lines, parse_floats, read_text, write_text};
use crate::error::{Error, Result};

pub const MAGIC: &str = "# coachmine features v1";

pub fn to_string(features: &FeatureSet) -> String {
    let mut out = format!("{MAGIC}\nvectors {} dim {}\n", features.vectors().len(), features.dim());
    for v in features.vectors() {
        out.push_str(&join_floats(v));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str, path: &Path) -> Result<FeatureSet> {
    let mut lines = numbered_lines(text);
    expect_magic(&mut lines, MAGIC, path)?;
    let (n, header) = lines.next().ok_or_else(|| Error::format(path, None, "missing header"))?;
    let fields = header_fields(header, path, n)?;
    let count: usize = header_value(&fields, "vectors", path, n)?;
    let dim: usize = header_value(&fields, "dim", path, n)?;
    let vectors = lines
        .map(|(i, line)| parse_floats(line, dim, path, i))
        .collect::<Result<Vec<_>>>()?;
    if vectors.len() != count {
        return Err(Error::format(path, None, format!("header says {count} vectors, found {}", vectors.len())));
    }
    FeatureSet::new(vectors).map_err(|e| Error::format(path, None, e))
}

pub fn read(path: &Path) -> Result<FeatureSet> {
    parse(&read_text(path)?, path)
}

pub fn write(path: &Path, features: &FeatureSet) -> Result<()> {
    write_text(path, &to_string(features))
}
