//! Codebook files.
//!
//! ```text
//! # coachmine codebook v1
//! normalization hip_midpoint/torso_length
//! size M dim 51
//! version vq1-M-<12 hex digits>
//! <51 values of centroid 0>
//! …
//! <51 values of centroid M-1>
//! ```
//!
//! The version line is recomputed from the centroids on load and must match, so a hand-edited
//! table is rejected instead of silently producing different tokens.

use std::path::Path;

use coachmine_core::codec::{Codebook, FrameVector, NormalizationSpec, FRAME_DIM};

use super::{expect_magic, header_fields, header_value, join_floats, numbered_lines, parse_floats, read_text, write_text};
use crate::error::{Error, Result};

pub const MAGIC: &str = "# coachmine codebook v1";

pub fn to_string(codebook: &Codebook) -> String {
    let mut out = format!(
        "{MAGIC}\nnormalization {}\nsize {} dim {FRAME_DIM}\nversion {}\n",
        codebook.normalization().name(),
        codebook.len(),
        codebook.version()
    );
    for c in codebook.centroids() {
        out.push_str(&join_floats(c));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str, path: &Path) -> Result<Codebook> {
    let mut lines = numbered_lines(text);
    expect_magic(&mut lines, MAGIC, path)?;
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::format(path, None, format!("missing {what} line")));

    let (n, line) = next("normalization")?;
    let fields = header_fields(line, path, n)?;
    let name: String = header_value(&fields, "normalization", path, n)?;
    let normalization = NormalizationSpec::from_name(&name)
        .ok_or_else(|| Error::format(path, Some(n), format!("unknown normalization `{name}`")))?;

    let (n, line) = next("size")?;
    let fields = header_fields(line, path, n)?;
    let size: usize = header_value(&fields, "size", path, n)?;
    let dim: usize = header_value(&fields, "dim", path, n)?;
    if dim != FRAME_DIM {
        return Err(Error::format(path, Some(n), format!("expected dim {FRAME_DIM}, got {dim}")));
    }

    let (n, line) = next("version")?;
    let fields = header_fields(line, path, n)?;
    let version: String = header_value(&fields, "version", path, n)?;

    let centroids = lines
        .map(|(i, line)| {
            let v = parse_floats(line, FRAME_DIM, path, i)?;
            Ok(FrameVector::try_from(v.as_slice()).expect("length checked"))
        })
        .collect::<Result<Vec<_>>>()?;
    if centroids.len() != size {
        return Err(Error::format(path, None, format!("header says {size} centroids, found {}", centroids.len())));
    }
    let codebook = Codebook::new(centroids, normalization).map_err(|e| Error::format(path, None, e))?;
    if codebook.version() != version {
        return Err(Error::format(
            path,
            Some(n),
            format!("version {version} does not match centroids ({})", codebook.version()),
        ));
    }
    Ok(codebook)
}

pub fn read(path: &Path) -> Result<Codebook> {
    parse(&read_text(path)?, path)
}

pub fn write(path: &Path, codebook: &Codebook) -> Result<()> {
    write_text(path, &to_string(codebook))
}
