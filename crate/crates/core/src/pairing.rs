//! Mining (learner, commentary, expert) pairs and turning them into aligned coaching tuples.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::align::{best_window, topk_partition, AlignmentResult, SearchOptions, Window};
use crate::commentary::{BodyRegion, CommentaryLabel, CommentaryRecord, RegionLabel};
use crate::error::{Error, Result};
use crate::pose::{AlignMode, PoseSequence, Scaling};

/// Demonstrator proficiency, in increasing order of expertise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SkillLevel {
    Novice,
    EarlyExpert,
    IntermediateExpert,
    LateExpert,
}

impl SkillLevel {
    pub const ALL: [SkillLevel; 4] = [
        SkillLevel::Novice,
        SkillLevel::EarlyExpert,
        SkillLevel::IntermediateExpert,
        SkillLevel::LateExpert,
    ];

    /// Novices and early experts supply the incorrect executions.
    pub fn is_learner(self) -> bool {
        matches!(self, SkillLevel::Novice | SkillLevel::EarlyExpert)
    }

    /// Intermediate and late experts supply the corrections.
    pub fn is_expert(self) -> bool {
        matches!(self, SkillLevel::IntermediateExpert | SkillLevel::LateExpert)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledCommentary {
    pub record: CommentaryRecord,
    pub label: CommentaryLabel,
}

/// Precomputed video feature vectors, one per feature window, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl FeatureSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("feature set is empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("feature vectors have dimension 0".into()));
        }
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "feature dimension mismatch: {} vs {dim}",
                bad.len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn mean_pooled(&self) -> Vec<f64> {
        let mut mean = alloc::vec![0.0; self.dim];
        for v in &self.vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let n = self.vectors.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// One recorded demonstration with its labeled commentary.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub demo_id: String,
    /// Demonstrations of the same participant are never paired with each other.
    pub participant_id: Option<String>,
    pub pose: PoseSequence,
    pub skill: SkillLevel,
    pub scenario: String,
    pub commentaries: Vec<LabeledCommentary>,
    pub video_features: Option<FeatureSet>,
}

/// A member of the candidate collection: a learner commentary flagging `region` as needing
/// improvement, and an expert commentary praising the same region, in the same scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollectionEntry {
    pub learner_id: String,
    pub learner_commentary: usize,
    pub expert_id: String,
    pub expert_commentary: usize,
    pub region: BodyRegion,
}

impl CollectionEntry {
    pub fn key(&self) -> TupleKey {
        TupleKey {
            learner_id: self.learner_id.clone(),
            learner_commentary: self.learner_commentary,
            expert_id: self.expert_id.clone(),
            expert_commentary: self.expert_commentary,
            region: self.region,
        }
    }
}

/// Stable identity of a collection entry or tuple: `learner#i|expert#j|Region`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleKey {
    pub learner_id: String,
    pub learner_commentary: usize,
    pub expert_id: String,
    pub expert_commentary: usize,
    pub region: BodyRegion,
}

impl fmt::Display for TupleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}#{}|{}#{}|{}",
            self.learner_id, self.learner_commentary, self.expert_id, self.expert_commentary, self.region
        )
    }
}

fn paired_regions<'a>(
    learner: &'a CommentaryLabel,
    expert: &'a CommentaryLabel,
) -> impl Iterator<Item = BodyRegion> + 'a {
    learner
        .regions_with(RegionLabel::NeedsImprovement)
        .filter(|r| expert.label(*r) == RegionLabel::Correct)
}

/// Whether two demonstrations may be paired as (learner, expert).
pub fn eligible_pair(learner: &Demonstration, expert: &Demonstration) -> bool {
    learner.skill.is_learner()
        && expert.skill.is_expert()
        && learner.scenario == expert.scenario
        && !matches!(
            (&learner.participant_id, &expert.participant_id),
            (Some(a), Some(b)) if a == b
        )
}

/// Every (learner commentary, expert commentary, region) triple where the learner is flagged
/// and the expert praised on the same region. Sorted by learner, expert, then region.
pub fn build_collection(demos: &[Demonstration]) -> Vec<CollectionEntry> {
    let mut out = Vec::new();
    for learner in demos.iter().filter(|d| d.skill.is_learner()) {
        for expert in demos.iter().filter(|d| eligible_pair(learner, d)) {
            for (li, lc) in learner.commentaries.iter().enumerate() {
                for (ei, ec) in expert.commentaries.iter().enumerate() {
                    for region in paired_regions(&lc.label, &ec.label) {
                        out.push(CollectionEntry {
                            learner_id: learner.demo_id.clone(),
                            learner_commentary: li,
                            expert_id: expert.demo_id.clone(),
                            expert_commentary: ei,
                            region,
                        });
                    }
                }
            }
        }
    }
    sort_entries(&mut out);
    out.dedup();
    out
}

fn sort_entries(entries: &mut [CollectionEntry]) {
    entries.sort_by(|a, b| {
        (&a.learner_id, &a.expert_id, a.region, a.learner_commentary, a.expert_commentary).cmp(&(
            &b.learner_id,
            &b.expert_id,
            b.region,
            b.learner_commentary,
            b.expert_commentary,
        ))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Test,
}

/// Assigns a learner demonstration to a split from a seeded SHA-256 of its id.
pub fn assign_split(seed: u64, learner_id: &str, test_fraction: f64) -> Split {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(learner_id.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    let unit = (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64;
    if unit < test_fraction {
        Split::Test
    } else {
        Split::Train
    }
}

/// Parameters for turning the collection into the aligned dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub window_length_s: f64,
    pub k_train: usize,
    pub k_test: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub stride: usize,
    pub mode: AlignMode,
    pub scaling: Scaling,
    /// Require expert windows to strictly contain the expert commentary time.
    pub anchor_expert: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window_length_s: crate::defaults::WINDOW_LENGTH_S,
            k_train: crate::defaults::K_TRAIN,
            k_test: crate::defaults::K_TEST,
            test_fraction: crate::defaults::TEST_FRACTION,
            seed: crate::defaults::SEED,
            stride: 1,
            mode: AlignMode::PerFrame,
            scaling: Scaling::Similarity,
            anchor_expert: true,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_length_s.is_finite() && self.window_length_s > 0.0) {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        if self.k_train == 0 || self.k_test == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidArgument("test fraction must lie in [0, 1]".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn window_frames(&self, fps: f64) -> usize {
        libm::round(self.window_length_s * fps) as usize
    }

    pub fn k_for(&self, split: Split) -> usize {
        match split {
            Split::Train => self.k_train,
            Split::Test => self.k_test,
        }
    }
}

/// A learner clip, the summarized feedback, and the expert clip that corrects it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoachingTuple {
    pub learner_id: String,
    pub learner_commentary: usize,
    pub learner_window: Window,
    pub summary: String,
    pub expert_id: String,
    pub expert_commentary: usize,
    pub expert_window: Window,
    pub matched_region: BodyRegion,
    pub alignment_score_mm: f64,
    pub split: Split,
    /// Number of emitted tuples that reuse this tuple's expert commentary.
    pub expert_reuse: usize,
}

impl CoachingTuple {
    pub fn key(&self) -> TupleKey {
        TupleKey {
            learner_id: self.learner_id.clone(),
            learner_commentary: self.learner_commentary,
            expert_id: self.expert_id.clone(),
            expert_commentary: self.expert_commentary,
            region: self.matched_region,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SkipReason {
    UnknownDemo,
    UnknownCommentary,
    FpsMismatch,
    LearnerTooShort,
    NoCandidateWindow,
    DegenerateInput,
    AlignmentError,
    TopkFiltered,
    RejectedByReview,
}

impl SkipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::UnknownDemo => "unknown_demo",
            SkipReason::UnknownCommentary => "unknown_commentary",
            SkipReason::FpsMismatch => "fps_mismatch",
            SkipReason::LearnerTooShort => "learner_too_short",
            SkipReason::NoCandidateWindow => "no_candidate_window",
            SkipReason::DegenerateInput => "degenerate_input",
            SkipReason::AlignmentError => "alignment_error",
            SkipReason::TopkFiltered => "topk_filtered",
            SkipReason::RejectedByReview => "rejected_by_review",
        }
    }
}

/// A collection entry that did not become a tuple, and why.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkipRecord {
    pub entry: CollectionEntry,
    pub reason: SkipReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetBuild {
    pub tuples: Vec<CoachingTuple>,
    pub skips: Vec<SkipRecord>,
    pub collection_size: usize,
}

impl DatasetBuild {
    pub fn skip_histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut hist = BTreeMap::new();
        for s in &self.skips {
            *hist.entry(s.reason.as_str()).or_insert(0) += 1;
        }
        hist
    }
}

/// Looks up demonstrations by id.
pub fn index_demos(demos: &[Demonstration]) -> BTreeMap<&str, &Demonstration> {
    demos.iter().map(|d| (d.demo_id.as_str(), d)).collect()
}

/// Aligns a single collection entry: learner window centered on the learner commentary, expert
/// window searched (optionally anchored on the expert commentary).
pub fn align_entry(
    demos: &BTreeMap<&str, &Demonstration>,
    entry: &CollectionEntry,
    config: &DatasetConfig,
) -> core::result::Result<AlignmentResult, (SkipReason, String)> {
    let learner = demos
        .get(entry.learner_id.as_str())
        .ok_or((SkipReason::UnknownDemo, entry.learner_id.clone()))?;
    let expert = demos
        .get(entry.expert_id.as_str())
        .ok_or((SkipReason::UnknownDemo, entry.expert_id.clone()))?;
    let lc = learner
        .commentaries
        .get(entry.learner_commentary)
        .ok_or((SkipReason::UnknownCommentary, entry.key().to_string()))?;
    let ec = expert
        .commentaries
        .get(entry.expert_commentary)
        .ok_or((SkipReason::UnknownCommentary, entry.key().to_string()))?;

    let fps = learner.pose.fps();
    if (expert.pose.fps() - fps).abs() > 1e-9 {
        return Err((
            SkipReason::FpsMismatch,
            format!("learner {fps} fps, expert {} fps", expert.pose.fps()),
        ));
    }
    let len = config.window_frames(fps);
    let learner_window = Window::centered(lc.record.timestamp_s * fps, len, learner.pose.len())
        .map_err(|e| (SkipReason::LearnerTooShort, e.to_string()))?;
    let options = SearchOptions {
        anchor_frame: config
            .anchor_expert
            .then(|| libm::floor(ec.record.timestamp_s * fps) as usize),
        stride: config.stride,
        mode: config.mode,
        scaling: config.scaling,
    };
    best_window(&learner.pose, learner_window, &expert.pose, &options).map_err(|e| {
        let reason = match e {
            Error::NoCandidateWindow(_) => SkipReason::NoCandidateWindow,
            Error::DegenerateInput(_) => SkipReason::DegenerateInput,
            _ => SkipReason::AlignmentError,
        };
        (reason, e.to_string())
    })
}

/// Applies per-learner-instance top-k, split assignment and review rejections to aligned
/// entries. `alignments[i]` belongs to `entries[i]`.
pub fn assemble_dataset(
    demos: &BTreeMap<&str, &Demonstration>,
    entries: &[CollectionEntry],
    alignments: Vec<core::result::Result<AlignmentResult, (SkipReason, String)>>,
    config: &DatasetConfig,
    rejected: &BTreeSet<String>,
) -> DatasetBuild {
    assert_eq!(entries.len(), alignments.len(), "one alignment per entry");
    let mut build = DatasetBuild {
        collection_size: entries.len(),
        ..Default::default()
    };

    let mut aligned = Vec::new();
    for (entry, result) in entries.iter().zip(alignments) {
        match result {
            Ok(r) => {
                let split = assign_split(config.seed, &entry.learner_id, config.test_fraction);
                aligned.push((entry, r, split));
            }
            Err((reason, detail)) => build.skips.push(SkipRecord {
                entry: entry.clone(),
                reason,
                detail,
            }),
        }
    }

    let (kept, dropped) = topk_partition(
        aligned,
        |(_, _, split)| config.k_for(*split),
        |(e, _, _)| (e.learner_id.clone(), e.learner_commentary),
        |(_, r, _)| r.score_mm,
    );
    for (entry, r, _) in dropped {
        build.skips.push(SkipRecord {
            entry: entry.clone(),
            reason: SkipReason::TopkFiltered,
            detail: format!("score {} mm", r.score_mm),
        });
    }

    for (entry, r, split) in kept {
        if split == Split::Test && rejected.contains(&entry.key().to_string()) {
            build.skips.push(SkipRecord {
                entry: entry.clone(),
                reason: SkipReason::RejectedByReview,
                detail: String::new(),
            });
            continue;
        }
        let summary = demos
            .get(entry.learner_id.as_str())
            .and_then(|d| d.commentaries.get(entry.learner_commentary))
            .map(|c| c.label.summary().to_string())
            .unwrap_or_default();
        build.tuples.push(CoachingTuple {
            learner_id: entry.learner_id.clone(),
            learner_commentary: entry.learner_commentary,
            learner_window: r.learner_window,
            summary,
            expert_id: entry.expert_id.clone(),
            expert_commentary: entry.expert_commentary,
            expert_window: r.expert_window,
            matched_region: entry.region,
            alignment_score_mm: r.score_mm,
            split,
            expert_reuse: 0,
        });
    }

    let mut reuse: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for t in &build.tuples {
        *reuse.entry((t.expert_id.clone(), t.expert_commentary)).or_insert(0) += 1;
    }
    for t in build.tuples.iter_mut() {
        t.expert_reuse = reuse[&(t.expert_id.clone(), t.expert_commentary)];
    }
    build
        .skips
        .sort_by(|a, b| (&a.entry, &a.reason).cmp(&(&b.entry, &b.reason)));
    build
}

/// Aligns an explicit collection against the demonstrations, sequentially.
pub fn align_collection(
    demos: &[Demonstration],
    entries: &[CollectionEntry],
    config: &DatasetConfig,
    rejected: &BTreeSet<String>,
) -> Result<DatasetBuild> {
    config.validate()?;
    let index = index_demos(demos);
    let alignments = entries
        .iter()
        .map(|e| align_entry(&index, e, config))
        .collect();
    Ok(assemble_dataset(&index, entries, alignments, config, rejected))
}

/// Collection mining followed by alignment, top-k filtering and splitting.
pub fn build_dataset(demos: &[Demonstration], config: &DatasetConfig) -> Result<DatasetBuild> {
    let collection = build_collection(demos);
    align_collection(demos, &collection, config, &BTreeSet::new())
}
