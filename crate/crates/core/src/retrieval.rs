//! Expert demonstration retrieval and ranking metrics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::align::{best_window, SearchOptions, Window};
use crate::codec::{encode, token_histogram, Codebook};
use crate::error::{Error, Result};
use crate::pairing::Demonstration;

/// Scores a candidate against a query; lower is better.
pub trait CandidateScorer {
    fn score(&self, query: &Demonstration, candidate: &Demonstration) -> Result<f64>;
    fn name(&self) -> &'static str;
}

/// Built-in scorers.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    /// Best-window PA-MPJPE (mm) of the whole query against the candidate.
    PoseAlignment(SearchOptions),
    /// `1 − cos` between mean-pooled video feature vectors.
    FeatureCosine,
    /// `1 − shared tokens / max(len)` over codec token histograms.
    TokenOverlap(&'a Codebook),
}

impl CandidateScorer for Scorer<'_> {
    fn score(&self, query: &Demonstration, candidate: &Demonstration) -> Result<f64> {
        match self {
            Scorer::PoseAlignment(options) => {
                let options = SearchOptions {
                    anchor_frame: None,
                    ..*options
                };
                let window = Window::new(0, query.pose.len());
                Ok(best_window(&query.pose, window, &candidate.pose, &options)?.score_mm)
            }
            Scorer::FeatureCosine => {
                let features = |d: &Demonstration| {
                    d.video_features
                        .as_ref()
                        .map(|f| f.mean_pooled())
                        .ok_or_else(|| Error::MissingModality {
                            id: d.demo_id.clone(),
                            modality: "video_features",
                        })
                };
                let (q, c) = (features(query)?, features(candidate)?);
                if q.len() != c.len() {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "feature dimensions differ: {} vs {}",
                        q.len(),
                        c.len()
                    )));
                }
                Ok(1.0 - cosine(&q, &c))
            }
            Scorer::TokenOverlap(codebook) => {
                let q = encode(&query.pose, codebook)?.tokens;
                let c = encode(&candidate.pose, codebook)?.tokens;
                Ok(token_overlap_distance(&q, &c, codebook.len()))
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Scorer::PoseAlignment(_) => "pose_alignment",
            Scorer::FeatureCosine => "feature_cosine",
            Scorer::TokenOverlap(_) => "token_overlap",
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn token_overlap_distance(a: &[u32], b: &[u32], codebook_size: usize) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let (ha, hb) = (token_histogram(a, codebook_size), token_histogram(b, codebook_size));
    let common: u32 = ha.iter().zip(&hb).map(|(x, y)| *x.min(y)).sum();
    1.0 - common as f64 / longest as f64
}

/// Candidates for one query in ascending score order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankedResult {
    pub query_id: String,
    pub ranked: Vec<RankedCandidate>,
    /// 1-indexed position of the ground-truth candidate.
    pub rank_of_ground_truth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankedCandidate {
    pub id: String,
    pub score: f64,
}

/// Orders pre-computed `(id, score)` pairs ascending (stable) and locates the ground truth.
pub fn rank_scores(
    query_id: impl Into<String>,
    scores: Vec<(String, f64)>,
    ground_truth: Option<&str>,
) -> Result<RankedResult> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no candidates to rank".into()));
    }
    if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("non-finite score for {id}")));
    }
    let mut ranked: Vec<RankedCandidate> = scores
        .into_iter()
        .map(|(id, score)| RankedCandidate { id, score })
        .collect();
    ranked.sort_by(|a, b| a.score.total_cmp(&b.score));
    let rank_of_ground_truth =
        ground_truth.and_then(|gt| ranked.iter().position(|c| c.id == gt).map(|p| p + 1));
    Ok(RankedResult {
        query_id: query_id.into(),
        ranked,
        rank_of_ground_truth,
    })
}

/// Scores every candidate and ranks them; ties keep input order.
pub fn retrieve(
    query: &Demonstration,
    candidates: &[Demonstration],
    scorer: &impl CandidateScorer,
    ground_truth: Option<&str>,
) -> Result<RankedResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate set is empty".into()));
    }
    let scores = candidates
        .iter()
        .map(|c| Ok((c.demo_id.clone(), scorer.score(query, c)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_scores(query.demo_id.clone(), scores, ground_truth)
}

fn ranks(results: &[RankedResult]) -> Result<Vec<usize>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    results
        .iter()
        .map(|r| {
            r.rank_of_ground_truth.ok_or_else(|| {
                Error::InvalidArgument(alloc::format!("query {} has no ground-truth rank", r.query_id))
            })
        })
        .collect()
}

/// Percentage of queries whose ground truth ranks within the top `k`.
pub fn recall_at_k(results: &[RankedResult], k: usize) -> Result<f64> {
    let ranks = ranks(results)?;
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(100.0 * hits as f64 / ranks.len() as f64)
}

/// Median ground-truth rank; the mean of the two middle ranks for an even count.
pub fn median_rank(results: &[RankedResult]) -> Result<f64> {
    let mut ranks = ranks(results)?;
    ranks.sort_unstable();
    let n = ranks.len();
    Ok(if n % 2 == 1 {
        ranks[n / 2] as f64
    } else {
        (ranks[n / 2 - 1] + ranks[n / 2]) as f64 / 2.0
    })
}
