//! Sliding-window temporal alignment and top-k candidate filtering.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pose::{pa_mpjpe_frames, AlignMode, PoseSequence, PreparedFrames, Scaling};

/// A run of `length_frames` frames starting at `start_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub start_frame: usize,
    pub length_frames: usize,
}

impl Window {
    pub fn new(start_frame: usize, length_frames: usize) -> Self {
        Self {
            start_frame,
            length_frames,
        }
    }

    /// One past the last frame.
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.length_frames
    }

    pub fn fits(&self, sequence_len: usize) -> bool {
        self.length_frames > 0 && self.end_frame() <= sequence_len
    }

    /// True when `frame` lies strictly between the first and last frame of the window.
    pub fn strictly_contains(&self, frame: usize) -> bool {
        self.start_frame < frame && frame + 1 < self.end_frame()
    }

    /// A window of `length_frames` centered on `center_frame`, shifted to stay inside
    /// `[0, sequence_len)`. Fails only when the sequence is shorter than the window.
    pub fn centered(center_frame: f64, length_frames: usize, sequence_len: usize) -> Result<Self> {
        if length_frames == 0 || length_frames > sequence_len {
            return Err(Error::WindowOutOfBounds {
                start: 0,
                length: length_frames,
                sequence_len,
            });
        }
        let ideal = libm::round(center_frame - length_frames as f64 / 2.0);
        let max_start = (sequence_len - length_frames) as f64;
        let start = ideal.clamp(0.0, max_start) as usize;
        Ok(Self::new(start, length_frames))
    }

    pub(crate) fn check(&self, sequence_len: usize) -> Result<()> {
        if self.fits(sequence_len) {
            Ok(())
        } else {
            Err(Error::WindowOutOfBounds {
                start: self.start_frame,
                length: self.length_frames,
                sequence_len,
            })
        }
    }
}

/// Best expert window found for a learner window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentResult {
    pub learner_window: Window,
    pub expert_window: Window,
    pub score_mm: f64,
}

/// Search parameters for [`best_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Expert frame that candidate windows must strictly contain.
    pub anchor_frame: Option<usize>,
    pub stride: usize,
    pub mode: AlignMode,
    pub scaling: Scaling,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            anchor_frame: None,
            stride: 1,
            mode: AlignMode::PerFrame,
            scaling: Scaling::Similarity,
        }
    }
}

/// Finds the expert window of the learner window's length with the lowest PA-MPJPE.
///
/// Candidates start at `0, stride, 2·stride, …`; ties go to the earliest start.
pub fn best_window(
    learner: &PoseSequence,
    learner_window: Window,
    expert: &PoseSequence,
    options: &SearchOptions,
) -> Result<AlignmentResult> {
    if options.stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    learner_window.check(learner.len())?;
    let len = learner_window.length_frames;
    if expert.len() < len {
        return Err(Error::NoCandidateWindow("expert sequence is shorter than the window"));
    }

    let candidates: Vec<Window> = (0..=expert.len() - len)
        .step_by(options.stride)
        .map(|start| Window::new(start, len))
        .filter(|w| options.anchor_frame.is_none_or(|a| w.strictly_contains(a)))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidateWindow("no window strictly contains the anchor frame"));
    }

    let learner_frames =
        &learner.frames()[learner_window.start_frame..learner_window.end_frame()];
    let score = |w: &Window| -> Result<f64> {
        pa_mpjpe_frames(
            learner_frames,
            &expert.frames()[w.start_frame..w.end_frame()],
            options.mode,
            options.scaling,
        )
    };

    let mut best: Option<(Window, f64)> = None;
    match options.mode {
        AlignMode::PerFrame => {
            let prepared_learner = PreparedFrames::new(learner_frames);
            let prepared_expert = PreparedFrames::new(expert.frames());
            for w in candidates {
                let s = prepared_learner.per_frame_error(
                    0,
                    &prepared_expert,
                    w.start_frame,
                    len,
                    options.scaling,
                )?;
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((w, s));
                }
            }
        }
        AlignMode::PerSequence => {
            for w in candidates {
                let s = score(&w)?;
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((w, s));
                }
            }
        }
    }
    let (expert_window, score_mm) = best.expect("candidate list is non-empty");
    Ok(AlignmentResult {
        learner_window,
        expert_window,
        score_mm,
    })
}

/// Keeps, per group, the `k` items with the smallest score. Ties keep input order; survivors
/// are returned in input order.
pub fn topk_filter<T, G, FG, FS>(items: Vec<T>, k: usize, group: FG, score: FS) -> Vec<T>
where
    G: Ord,
    FG: Fn(&T) -> G,
    FS: Fn(&T) -> f64,
{
    topk_partition(items, |_| k, group, score).0
}

/// Like [`topk_filter`] with a per-item `k` (taken from the group's first item), also returning
/// the dropped items in input order.
pub fn topk_partition<T, G, FK, FG, FS>(
    items: Vec<T>,
    k_for: FK,
    group: FG,
    score: FS,
) -> (Vec<T>, Vec<T>)
where
    G: Ord,
    FK: Fn(&T) -> usize,
    FG: Fn(&T) -> G,
    FS: Fn(&T) -> f64,
{
    let mut groups: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(group(item)).or_default().push(i);
    }
    let mut keep = alloc::vec![false; items.len()];
    for members in groups.values_mut() {
        let k = k_for(&items[members[0]]);
        members.sort_by(|&a, &b| score(&items[a]).total_cmp(&score(&items[b])));
        for &i in members.iter().take(k) {
            keep[i] = true;
        }
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (item, keep) in items.into_iter().zip(keep) {
        if keep {
            kept.push(item);
        } else {
            dropped.push(item);
        }
    }
    (kept, dropped)
}
