//! 3D pose types and Procrustes-aligned joint error (PA-MPJPE).
//!
//! Coordinates are meters; PA-MPJPE is reported in millimeters.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Number of joints in the MS-COCO keypoint layout.
pub const JOINT_COUNT: usize = 17;

/// Centered sums of squares at or below this are treated as coincident points (m²).
pub const DEGENERATE_VARIANCE: f64 = 1e-18;

/// MS-COCO 17-keypoint joint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Joint {
    Nose = 0,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const fn index(self) -> usize {
        self as usize
    }
}

/// One frame of 17 joints.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseFrame {
    joints: [[f64; 3]; JOINT_COUNT],
}

impl PoseFrame {
    pub fn new(joints: [[f64; 3]; JOINT_COUNT]) -> Result<Self> {
        if joints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite joint coordinate".into()));
        }
        Ok(Self { joints })
    }

    /// Builds a frame from 51 values laid out joint-major (x, y, z per joint).
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != JOINT_COUNT * 3 {
            return Err(Error::InvalidPose(format!(
                "expected {} values, got {}",
                JOINT_COUNT * 3,
                values.len()
            )));
        }
        let mut joints = [[0.0; 3]; JOINT_COUNT];
        for (joint, chunk) in joints.iter_mut().zip(values.chunks_exact(3)) {
            joint.copy_from_slice(chunk);
        }
        Self::new(joints)
    }

    pub fn joints(&self) -> &[[f64; 3]; JOINT_COUNT] {
        &self.joints
    }

    pub fn joint(&self, joint: Joint) -> Vector3<f64> {
        Vector3::from(self.joints[joint.index()])
    }

    pub fn flatten(&self) -> [f64; JOINT_COUNT * 3] {
        let mut out = [0.0; JOINT_COUNT * 3];
        for (chunk, joint) in out.chunks_exact_mut(3).zip(self.joints.iter()) {
            chunk.copy_from_slice(joint);
        }
        out
    }

    /// Applies `s·R·x + t` to every joint.
    pub fn transformed(&self, transform: &SimilarityTransform) -> Self {
        let mut joints = self.joints;
        for joint in joints.iter_mut() {
            *joint = transform.apply(Vector3::from(*joint)).into();
        }
        Self { joints }
    }
}

/// An ordered run of pose frames sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseSequence {
    frames: Vec<PoseFrame>,
    fps: f64,
    source_id: String,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: f64, source_id: impl Into<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidPose("sequence has no frames".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidPose(format!("fps must be positive, got {fps}")));
        }
        Ok(Self {
            frames,
            fps,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// Copies out `len` frames starting at `start` as a new sequence.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.frames.len() {
            return Err(Error::WindowOutOfBounds {
                start,
                length: len,
                sequence_len: self.frames.len(),
            });
        }
        Ok(Self {
            frames: self.frames[start..start + len].to_vec(),
            fps: self.fps,
            source_id: self.source_id.clone(),
        })
    }

    pub fn transformed(&self, transform: &SimilarityTransform) -> Self {
        Self {
            frames: self.frames.iter().map(|f| f.transformed(transform)).collect(),
            fps: self.fps,
            source_id: self.source_id.clone(),
        }
    }
}

/// `x ↦ scale · rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, point: Vector3<f64>) -> Vector3<f64> {
        self.rotation * point * self.scale + self.translation
    }

    /// Checks scale > 0, RᵀR = I and det R = +1 to within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let orth = self.rotation.transpose() * self.rotation - Matrix3::identity();
        self.scale > 0.0
            && self.scale.is_finite()
            && orth.iter().all(|v| v.abs() <= tol)
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Whether the alignment may rescale the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    #[default]
    Similarity,
    /// Rotation and translation only (scale fixed at 1).
    Rigid,
}

/// How PA-MPJPE fits transforms across a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AlignMode {
    /// One transform per frame pair.
    #[default]
    PerFrame,
    /// One transform for all frames stacked together.
    PerSequence,
}

/// Result of a Procrustes fit: the transform and its sum of squared residuals (m²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcrustesFit {
    pub transform: SimilarityTransform,
    pub residual: f64,
}

/// Least-squares similarity transform mapping `source` onto `target`.
pub fn procrustes_fit(source: &[[f64; 3]], target: &[[f64; 3]]) -> Result<ProcrustesFit> {
    procrustes_fit_with(source, target, Scaling::Similarity)
}

pub fn procrustes_fit_with(
    source: &[[f64; 3]],
    target: &[[f64; 3]],
    scaling: Scaling,
) -> Result<ProcrustesFit> {
    if source.len() != target.len() {
        return Err(Error::ShapeMismatch {
            left: source.len(),
            right: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::TooFewPoints(source.len()));
    }
    let src = Centered::new(source.iter().map(|p| Vector3::from(*p)))?;
    let tgt = Centered::new(target.iter().map(|p| Vector3::from(*p)))?;
    let (rotation, scale) = solve_rotation_scale(&src, &tgt, scaling);
    let translation = tgt.mean - rotation * src.mean * scale;
    let transform = SimilarityTransform {
        scale,
        rotation,
        translation,
    };
    let residual = source
        .iter()
        .zip(target)
        .map(|(s, t)| (transform.apply(Vector3::from(*s)) - Vector3::from(*t)).norm_squared())
        .sum();
    Ok(ProcrustesFit {
        transform,
        residual,
    })
}

/// A point cloud with its centroid removed.
#[derive(Debug, Clone)]
pub(crate) struct Centered {
    pub(crate) mean: Vector3<f64>,
    pub(crate) points: Vec<Vector3<f64>>,
    pub(crate) sum_sq: f64,
}

impl Centered {
    pub(crate) fn new(points: impl Iterator<Item = Vector3<f64>>) -> Result<Self> {
        let mut points: Vec<Vector3<f64>> = points.collect();
        let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / points.len() as f64;
        let mut sum_sq = 0.0;
        for p in points.iter_mut() {
            *p -= mean;
            sum_sq += p.norm_squared();
        }
        if !(sum_sq > DEGENERATE_VARIANCE) {
            return Err(Error::DegenerateInput("point set has zero variance after centering"));
        }
        Ok(Self {
            mean,
            points,
            sum_sq,
        })
    }

    fn from_frames(frames: &[PoseFrame]) -> Result<Self> {
        Self::new(
            frames
                .iter()
                .flat_map(|f| f.joints.iter().map(|j| Vector3::from(*j))),
        )
    }
}

/// Umeyama's closed form: SVD of the cross-covariance, with the smallest
/// singular direction flipped when the best orthogonal map is a reflection.
fn solve_rotation_scale(src: &Centered, tgt: &Centered, scaling: Scaling) -> (Matrix3<f64>, f64) {
    let mut cov = Matrix3::zeros();
    for (s, t) in src.points.iter().zip(&tgt.points) {
        cov += t * s.transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        let smallest = svd.singular_values.imin();
        signs[smallest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = match scaling {
        Scaling::Similarity => svd.singular_values.dot(&signs) / src.sum_sq,
        Scaling::Rigid => 1.0,
    };
    (rotation, scale)
}

/// Mean per-joint distance after aligning `src` onto `tgt` (meters).
fn aligned_mean_error(src: &Centered, tgt: &Centered, scaling: Scaling) -> f64 {
    let (rotation, scale) = solve_rotation_scale(src, tgt, scaling);
    let total: f64 = src
        .points
        .iter()
        .zip(&tgt.points)
        .map(|(s, t)| (rotation * s * scale - t).norm())
        .sum();
    total / src.points.len() as f64
}

/// PA-MPJPE in millimeters between two equally long sequences, aligning `a` onto `b`.
pub fn pa_mpjpe(a: &PoseSequence, b: &PoseSequence, mode: AlignMode) -> Result<f64> {
    pa_mpjpe_frames(a.frames(), b.frames(), mode, Scaling::Similarity)
}

/// Frame-slice form of [`pa_mpjpe`] with explicit scaling.
pub fn pa_mpjpe_frames(
    a: &[PoseFrame],
    b: &[PoseFrame],
    mode: AlignMode,
    scaling: Scaling,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidPose("empty frame run".into()));
    }
    let meters = match mode {
        AlignMode::PerFrame => {
            let mut total = 0.0;
            for (fa, fb) in a.iter().zip(b) {
                let src = Centered::from_frames(core::slice::from_ref(fa))?;
                let tgt = Centered::from_frames(core::slice::from_ref(fb))?;
                total += aligned_mean_error(&src, &tgt, scaling);
            }
            total / a.len() as f64
        }
        AlignMode::PerSequence => {
            let src = Centered::from_frames(a)?;
            let tgt = Centered::from_frames(b)?;
            aligned_mean_error(&src, &tgt, scaling)
        }
    };
    Ok(meters * 1000.0)
}

/// Per-frame centered clouds, computed once and reused across many window comparisons.
#[derive(Debug, Clone)]
pub(crate) struct PreparedFrames {
    frames: Vec<Option<Centered>>,
}

impl PreparedFrames {
    pub(crate) fn new(frames: &[PoseFrame]) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|f| Centered::from_frames(core::slice::from_ref(f)).ok())
                .collect(),
        }
    }

    /// Per-frame PA-MPJPE (mm) between `self[a_start..]` and `other[b_start..]` over `len` frames.
    pub(crate) fn per_frame_error(
        &self,
        a_start: usize,
        other: &PreparedFrames,
        b_start: usize,
        len: usize,
        scaling: Scaling,
    ) -> Result<f64> {
        let degenerate = || Error::DegenerateInput("point set has zero variance after centering");
        let mut total = 0.0;
        for i in 0..len {
            let src = self.frames[a_start + i].as_ref().ok_or_else(degenerate)?;
            let tgt = other.frames[b_start + i].as_ref().ok_or_else(degenerate)?;
            total += aligned_mean_error(src, tgt, scaling);
        }
        Ok(total / len as f64 * 1000.0)
    }
}
