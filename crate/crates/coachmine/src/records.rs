//! Line-delimited record types and corpus loading.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use coachmine_core::align::Window;
use coachmine_core::commentary::{CommentaryLabel, CommentaryRecord};
use coachmine_core::pairing::{CoachingTuple, Demonstration, LabeledCommentary, SkillLevel};
use coachmine_core::retrieval::RankedResult;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{features, jsonl, pose};

/// One line of the demonstration manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoEntry {
    pub demo_id: String,
    pub pose_path: String,
    pub skill: SkillLevel,
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Labeled,
    /// The reply did not parse.
    Discarded,
    /// The labeling service failed after retries.
    Failed,
}

/// Outcome of labeling one commentary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    /// 1-indexed line in the commentary manifest.
    pub line: usize,
    pub record: CommentaryRecord,
    pub status: LabelStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<CommentaryLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A dataset line: the tuple plus the hash of the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleRecord {
    #[serde(flatten)]
    pub tuple: CoachingTuple,
    pub config_hash: String,
}

/// A test tuple awaiting human verification. Rejected keys go in the `--reject` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub key: String,
    pub learner_id: String,
    pub learner_window: Window,
    pub summary: String,
    pub expert_id: String,
    pub expert_window: Window,
    pub alignment_score_mm: f64,
}

impl ReviewItem {
    pub fn new(t: &CoachingTuple) -> Self {
        Self {
            key: t.key().to_string(),
            learner_id: t.learner_id.clone(),
            learner_window: t.learner_window,
            summary: t.summary.clone(),
            expert_id: t.expert_id.clone(),
            expert_window: t.expert_window,
            alignment_score_mm: t.alignment_score_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub scorer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(flatten)]
    pub result: RankedResult,
}

/// A generated text and its references, for BLEU/ROUGE evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPair {
    pub id: String,
    pub hypothesis: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub scale: f64,
    pub root: [f64; 3],
}

/// Codec output for one pose file. `frame_params` lets `decode` restore the original placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub source_id: String,
    pub fps: f64,
    pub codebook_version: String,
    pub tokens: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frame_params: Vec<FrameParams>,
}

/// Reads the demonstration manifest.
pub fn read_demo_entries(path: &Path) -> Result<Vec<DemoEntry>> {
    let entries: Vec<DemoEntry> = jsonl::read(path)?;
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.demo_id.as_str()) {
            return Err(Error::format(path, None, format!("duplicate demo_id `{}`", e.demo_id)));
        }
    }
    Ok(entries)
}

fn resolve(manifest: &Path, relative: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new("")).join(relative)
}

/// Demonstrations with their labeled commentary attached (matched on `video_id == demo_id`, in
/// label-file order), plus the labeled records that matched no demonstration.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub demos: Vec<Demonstration>,
    pub attached: usize,
    pub unattached: Vec<LabelRecord>,
}

pub fn load_corpus(manifest: &Path, labels: &[LabelRecord], fps: f64) -> Result<Corpus> {
    let entries = read_demo_entries(manifest)?;
    let mut demos = entries
        .iter()
        .map(|e| {
            let pose_path = resolve(manifest, &e.pose_path);
            let pose = pose::read(&pose_path, &e.demo_id)?;
            if (pose.fps() - fps).abs() > 1e-9 {
                return Err(Error::format(
                    &pose_path,
                    Some(2),
                    format!("pose is {} fps but the pipeline runs at {fps}", pose.fps()),
                ));
            }
            let video_features = e
                .features_path
                .as_ref()
                .map(|p| features::read(&resolve(manifest, p)))
                .transpose()?;
            Ok(Demonstration {
                demo_id: e.demo_id.clone(),
                participant_id: e.participant_id.clone(),
                pose,
                skill: e.skill,
                scenario: e.scenario.clone(),
                commentaries: Vec::new(),
                video_features,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut attached = 0;
    let mut unattached = Vec::new();
    for l in labels {
        let Some(label) = &l.label else { continue };
        match demos.iter_mut().find(|d| d.demo_id == l.record.video_id) {
            Some(d) => {
                d.commentaries.push(LabeledCommentary {
                    record: l.record.clone(),
                    label: label.clone(),
                });
                attached += 1;
            }
            None => unattached.push(l.clone()),
        }
    }
    Ok(Corpus {
        demos,
        attached,
        unattached,
    })
}

/// Reads a review rejection list: one tuple key per line, `#` comments allowed.
pub fn read_reject_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}
