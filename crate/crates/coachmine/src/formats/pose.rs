//! Pose sequence files.
//!
//! ```text
//! # coachmine pose v1
//! frames 2 joints 17 fps 32
//! x0 y0 z0 x1 y1 z1 … x16 y16 z16
//! x0 y0 z0 …
//! ```
//!
//! One frame per line, 51 values in COCO joint order, meters. Values are written in Rust's
//! shortest round-trip form, so reading a written file gives back the same bits.

use std::path::Path;

use coachmine_core::pose::{PoseFrame, PoseSequence, JOINT_COUNT};

use super::{expect_magic, header_fields, header_value, join_floats, numbered_lines, parse_floats, read_text, write_text};
use crate::error::{Error, Result};

pub const MAGIC: &str = "# coachmine pose v1";

pub fn to_string(pose: &PoseSequence) -> String {
    let mut out = format!("{MAGIC}\nframes {} joints {JOINT_COUNT} fps {}\n", pose.len(), pose.fps());
    for frame in pose.frames() {
        out.push_str(&join_floats(&frame.flatten()));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str, source_id: &str, path: &Path) -> Result<PoseSequence> {
    let mut lines = numbered_lines(text);
    expect_magic(&mut lines, MAGIC, path)?;
    let (n, header) = lines.next().ok_or_else(|| Error::format(path, None, "missing header"))?;
    let fields = header_fields(header, path, n)?;
    let frames: usize = header_value(&fields, "frames", path, n)?;
    let joints: usize = header_value(&fields, "joints", path, n)?;
    let fps: f64 = header_value(&fields, "fps", path, n)?;
    if joints != JOINT_COUNT {
        return Err(Error::format(path, Some(n), format!("expected {JOINT_COUNT} joints, got {joints}")));
    }
    let parsed = lines
        .map(|(i, line)| {
            let values = parse_floats(line, JOINT_COUNT * 3, path, i)?;
            PoseFrame::from_flat(&values).map_err(|e| Error::format(path, Some(i), e))
        })
        .collect::<Result<Vec<_>>>()?;
    if parsed.len() != frames {
        return Err(Error::format(
            path,
            None,
            format!("header says {frames} frames, found {}", parsed.len()),
        ));
    }
    PoseSequence::new(parsed, fps, source_id).map_err(|e| Error::format(path, None, e))
}

pub fn read(path: &Path, source_id: &str) -> Result<PoseSequence> {
    parse(&read_text(path)?, source_id, path)
}

pub fn write(path: &Path, pose: &PoseSequence) -> Result<()> {
    write_text(path, &to_string(pose))
}
