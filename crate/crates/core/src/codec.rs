//! Frame-level vector-quantized pose codec.
//!
//! Frames are normalized (hip midpoint at the origin, unit torso length), flattened to 51 values
//! and mapped to the nearest centroid of a k-means codebook. Decoding maps each token back to its
//! centroid and re-applies a caller-supplied scale and root position.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pose::{Joint, PoseFrame, PoseSequence, JOINT_COUNT};

pub const FRAME_DIM: usize = JOINT_COUNT * 3;

/// Torso lengths below this (meters) cannot be normalized.
pub const MIN_TORSO_LENGTH: f64 = 1e-6;

pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

pub type FrameVector = [f64; FRAME_DIM];

/// The normalization recipe a codebook was trained under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationSpec {
    /// Root: midpoint of the two hips. Scale: distance from hip midpoint to shoulder midpoint.
    #[default]
    HipMidpointTorsoLength,
}

impl NormalizationSpec {
    pub fn name(self) -> &'static str {
        match self {
            NormalizationSpec::HipMidpointTorsoLength => "hip_midpoint/torso_length",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        (name == "hip_midpoint/torso_length").then_some(NormalizationSpec::HipMidpointTorsoLength)
    }
}

/// A normalized frame and the root/scale that were removed from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFrame {
    pub values: FrameVector,
    pub root: [f64; 3],
    pub scale: f64,
}

fn midpoint(a: &[f64], b: &[f64]) -> [f64; 3] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn torso(values: &[f64]) -> ([f64; 3], f64) {
    let j = |joint: Joint| &values[joint.index() * 3..joint.index() * 3 + 3];
    let hip = midpoint(j(Joint::LeftHip), j(Joint::RightHip));
    let shoulder = midpoint(j(Joint::LeftShoulder), j(Joint::RightShoulder));
    let d = [shoulder[0] - hip[0], shoulder[1] - hip[1], shoulder[2] - hip[2]];
    (hip, libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))
}

fn normalize_values(values: &FrameVector) -> Result<NormalizedFrame> {
    let (root, scale) = torso(values);
    if !(scale >= MIN_TORSO_LENGTH) {
        return Err(Error::DegenerateInput("torso length is below 1e-6 m"));
    }
    let mut out = [0.0; FRAME_DIM];
    for (i, (o, v)) in out.iter_mut().zip(values).enumerate() {
        *o = (v - root[i % 3]) / scale;
    }
    Ok(NormalizedFrame {
        values: out,
        root,
        scale,
    })
}

/// Euclidean projection onto the normalized manifold (hip midpoint at 0, unit torso).
///
/// Only the hip and shoulder coordinates enter the constraint, and their midpoint rows are
/// orthogonal with equal norm, so the nearest feasible point shifts both hips by `-hip` and both
/// shoulders by `u - shoulder`, where `u` is the unit vector along `shoulder`.
fn project_unit_torso(values: &FrameVector) -> Option<FrameVector> {
    let (hip, _) = torso(values);
    let j = |joint: Joint| &values[joint.index() * 3..joint.index() * 3 + 3];
    let shoulder = midpoint(j(Joint::LeftShoulder), j(Joint::RightShoulder));
    let rel = [shoulder[0] - hip[0], shoulder[1] - hip[1], shoulder[2] - hip[2]];
    let norm = libm::sqrt(rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]);
    if !(norm >= MIN_TORSO_LENGTH) {
        return None;
    }
    let mut out = *values;
    for joint in [Joint::LeftHip, Joint::RightHip] {
        for a in 0..3 {
            out[joint.index() * 3 + a] -= hip[a];
        }
    }
    for joint in [Joint::LeftShoulder, Joint::RightShoulder] {
        for a in 0..3 {
            out[joint.index() * 3 + a] += rel[a] / norm - shoulder[a];
        }
    }
    Some(out)
}

/// Subtracts the hip midpoint, divides by torso length and flattens.
pub fn normalize_frame(frame: &PoseFrame) -> Result<NormalizedFrame> {
    normalize_values(&frame.flatten())
}

/// Inverse of [`normalize_frame`] given the removed scale and root.
pub fn denormalize(values: &FrameVector, scale: f64, root: [f64; 3]) -> Result<PoseFrame> {
    let mut out = [0.0; FRAME_DIM];
    for (i, (o, v)) in out.iter_mut().zip(values).enumerate() {
        *o = v * scale + root[i % 3];
    }
    PoseFrame::from_flat(&out)
}

fn squared_distance(a: &FrameVector, b: &FrameVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centroid table plus the normalization it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<FrameVector>,
    normalization: NormalizationSpec,
    version: String,
}

impl Codebook {
    /// Builds a codebook; the version tag is derived from the centroid bytes.
    pub fn new(centroids: Vec<FrameVector>, normalization: NormalizationSpec) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("codebook needs at least one centroid".into()));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("codebook has non-finite values".into()));
        }
        let version = version_tag(&centroids, normalization);
        Ok(Self {
            centroids,
            normalization,
            version,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroids(&self) -> &[FrameVector] {
        &self.centroids
    }

    pub fn normalization(&self) -> NormalizationSpec {
        self.normalization
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Index of the nearest centroid; ties resolve to the lowest index.
    pub fn nearest(&self, values: &FrameVector) -> (u32, f64) {
        let mut best = (0u32, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = squared_distance(values, c);
            if d < best.1 {
                best = (i as u32, d);
            }
        }
        best
    }
}

fn version_tag(centroids: &[FrameVector], normalization: NormalizationSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(normalization.name().as_bytes());
    for v in centroids.iter().flatten() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut tag = format!("vq1-{}-", centroids.len());
    for b in &digest[..6] {
        let _ = write!(tag, "{b:02x}");
    }
    tag
}

/// Per-frame codebook indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub fps: f64,
    pub source_id: String,
    pub codebook_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansReport {
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Seeded k-means++ / Lloyd training over normalized frames.
pub fn train_codebook(frames: &[PoseFrame], size: usize, seed: u64) -> Result<Codebook> {
    train_codebook_report(frames, size, seed).map(|(cb, _)| cb)
}

pub fn train_codebook_report(
    frames: &[PoseFrame],
    size: usize,
    seed: u64,
) -> Result<(Codebook, KMeansReport)> {
    if size == 0 {
        return Err(Error::InvalidArgument("codebook size must be positive".into()));
    }
    if frames.len() < size {
        return Err(Error::CorpusTooSmall {
            corpus: frames.len(),
            requested: size,
        });
    }
    let points: Vec<FrameVector> = frames
        .iter()
        .map(|f| normalize_frame(f).map(|n| n.values))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, size, &mut rng);

    let mut assignment = alloc::vec![0usize; points.len()];
    let mut distances = alloc::vec![0.0f64; points.len()];
    let mut previous = f64::INFINITY;
    let mut report = KMeansReport {
        inertia: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for iteration in 1..=MAX_ITERATIONS {
        let inertia = assign(&points, &centroids, &mut assignment, &mut distances);
        report.iterations = iteration;
        report.inertia = inertia;
        if inertia == 0.0
            || (previous.is_finite() && (previous - inertia).abs() <= RELATIVE_TOLERANCE * previous)
        {
            report.converged = true;
            break;
        }
        previous = inertia;
        update_centroids(&points, &mut centroids, &assignment, &distances);
    }
    if !report.converged {
        report.inertia = assign(&points, &centroids, &mut assignment, &mut distances);
    }
    Ok((
        Codebook::new(centroids, NormalizationSpec::HipMidpointTorsoLength)?,
        report,
    ))
}

fn kmeans_plus_plus(points: &[FrameVector], k: usize, rng: &mut ChaCha8Rng) -> Vec<FrameVector> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|d| *d > 0.0).unwrap();
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(
    points: &[FrameVector],
    centroids: &[FrameVector],
    assignment: &mut [usize],
    distances: &mut [f64],
) -> f64 {
    let mut inertia = 0.0;
    for ((p, a), dist) in points.iter().zip(assignment.iter_mut()).zip(distances.iter_mut()) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in centroids.iter().enumerate() {
            let d = squared_distance(p, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        *a = best.0;
        *dist = best.1;
        inertia += best.1;
    }
    inertia
}

/// Cluster means, re-projected to the normalized pose space (hip midpoint 0, unit torso).
/// Empty or degenerate clusters are reseeded to the points farthest from their centroids.
fn update_centroids(
    points: &[FrameVector],
    centroids: &mut [FrameVector],
    assignment: &[usize],
    distances: &[f64],
) {
    let mut sums = alloc::vec![[0.0; FRAME_DIM]; centroids.len()];
    let mut counts = alloc::vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut by_distance: Vec<usize> = (0..points.len()).collect();
    by_distance.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
    let mut donors = by_distance.into_iter();

    for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
        let projected = (*count > 0)
            .then(|| {
                let mut mean = *sum;
                mean.iter_mut().for_each(|m| *m /= *count as f64);
                project_unit_torso(&mean)
            })
            .flatten();
        *c = match projected {
            Some(v) => v,
            None => match donors.next() {
                Some(i) => points[i],
                None => *c,
            },
        };
    }
}

/// Maps each frame to its nearest centroid.
pub fn encode(pose: &PoseSequence, codebook: &Codebook) -> Result<TokenSequence> {
    let tokens = pose
        .frames()
        .iter()
        .map(|f| normalize_frame(f).map(|n| codebook.nearest(&n.values).0))
        .collect::<Result<_>>()?;
    Ok(TokenSequence {
        tokens,
        fps: pose.fps(),
        source_id: pose.source_id().into(),
        codebook_version: codebook.version().into(),
    })
}

/// Maps tokens back to poses with one scale and root for every frame.
pub fn decode(
    tokens: &TokenSequence,
    codebook: &Codebook,
    scale: f64,
    root: [f64; 3],
) -> Result<PoseSequence> {
    decode_with(tokens, codebook, |_| (scale, root))
}

/// Maps tokens back to poses with a per-frame `(scale, root)`.
pub fn decode_per_frame(
    tokens: &TokenSequence,
    codebook: &Codebook,
    params: &[(f64, [f64; 3])],
) -> Result<PoseSequence> {
    if params.len() != tokens.tokens.len() {
        return Err(Error::LengthMismatch {
            left: tokens.tokens.len(),
            right: params.len(),
        });
    }
    decode_with(tokens, codebook, |i| params[i])
}

fn decode_with(
    tokens: &TokenSequence,
    codebook: &Codebook,
    params: impl Fn(usize) -> (f64, [f64; 3]),
) -> Result<PoseSequence> {
    if tokens.codebook_version != codebook.version() {
        return Err(Error::CodebookMismatch {
            expected: codebook.version().into(),
            found: tokens.codebook_version.clone(),
        });
    }
    let frames = tokens
        .tokens
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let centroid = codebook.centroids.get(t as usize).ok_or(Error::TokenOutOfRange {
                token: t,
                size: codebook.len(),
            })?;
            let (scale, root) = params(i);
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidArgument(format!("decode scale must be positive, got {scale}")));
            }
            denormalize(centroid, scale, root)
        })
        .collect::<Result<_>>()?;
    PoseSequence::new(frames, tokens.fps, tokens.source_id.clone())
}

/// Token-count histogram over a codebook of `size` entries.
pub fn token_histogram(tokens: &[u32], size: usize) -> Vec<u32> {
    let mut hist = alloc::vec![0u32; size];
    for &t in tokens {
        if let Some(h) = hist.get_mut(t as usize) {
            *h += 1;
        }
    }
    hist
}
