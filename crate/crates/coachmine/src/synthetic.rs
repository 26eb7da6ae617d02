//! Synthetic corpus with planted learner/expert pairs.
//!
//! Each learner has one commentary flagging a region and each expert one commentary praising
//! it, with the four pairs using four different regions so every learner pairs with exactly one
//! expert. The expert's pose contains a similarity-transformed copy of the learner window that the
//! learner commentary selects, so the best alignment is known in advance and scores ~0 mm.

use std::path::Path;

use coachmine_core::align::Window;
use coachmine_core::commentary::{BodyRegion, CommentaryRecord};
use coachmine_core::pairing::{FeatureSet, SkillLevel};
use coachmine_core::pose::{PoseFrame, PoseSequence, JOINT_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, QuerySet};
use crate::error::Result;
use crate::formats::{features, jsonl, pose, write_text};
use crate::records::DemoEntry;

pub const FPS: f64 = 32.0;
pub const LEARNER_FRAMES: usize = 192;
pub const EXPERT_FRAMES: usize = 256;
/// Learner commentary time: a 128-frame window centered on frame 96 starts at frame 32.
pub const LEARNER_TIME_S: f64 = 3.0;
/// Expert commentary time: frame 134, strictly inside the planted copy.
pub const EXPERT_TIME_S: f64 = 4.1875;
pub const COPY_START: usize = 70;
pub const WINDOW_FRAMES: usize = 128;
const FEATURE_DIM: usize = 8;

/// (learner text, expert text, region) per planted pair.
const PAIRS: [(&str, &str, BodyRegion); 4] = [
    (
        "Her knees cave inward as she plants for the shot.",
        "Great knee bend through the whole motion.",
        BodyRegion::Legs,
    ),
    (
        "The ball slips because his fingers are too stiff.",
        "Nice soft fingers on the ball.",
        BodyRegion::Hands,
    ),
    (
        "His elbow flares out on the release.",
        "Excellent elbow alignment under the ball.",
        BodyRegion::Arms,
    ),
    (
        "He drops his head before the ball leaves.",
        "Good head position with eyes on the rim.",
        BodyRegion::Head,
    ),
];

/// The tuple the pipeline must produce for one planted pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub learner_id: String,
    pub expert_id: String,
    pub region: BodyRegion,
    pub learner_window: Window,
    pub expert_window: Window,
}

pub fn planted_pairs() -> Vec<PlantedPair> {
    (0..PAIRS.len())
        .map(|i| PlantedPair {
            learner_id: learner_id(i),
            expert_id: expert_id(i),
            region: PAIRS[i].2,
            learner_window: Window::new(32, WINDOW_FRAMES),
            expert_window: Window::new(COPY_START, WINDOW_FRAMES),
        })
        .collect()
}

fn learner_id(i: usize) -> String {
    format!("learner_{i}")
}

fn expert_id(i: usize) -> String {
    format!("expert_{i}")
}

/// A standing skeleton in COCO order, meters, y up.
const REST_POSE: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 1.62, 0.08],
    [-0.03, 1.66, 0.06],
    [0.03, 1.66, 0.06],
    [-0.07, 1.64, 0.0],
    [0.07, 1.64, 0.0],
    [-0.18, 1.42, 0.0],
    [0.18, 1.42, 0.0],
    [-0.22, 1.14, 0.02],
    [0.22, 1.14, 0.02],
    [-0.24, 0.88, 0.06],
    [0.24, 0.88, 0.06],
    [-0.1, 0.94, 0.0],
    [0.1, 0.94, 0.0],
    [-0.11, 0.5, 0.02],
    [0.11, 0.5, 0.02],
    [-0.11, 0.08, 0.0],
    [0.11, 0.08, 0.0],
];

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Smooth random motion: every joint coordinate oscillates around the rest pose, and the body
/// turns and drifts slowly. Values are rounded to 0.1 mm to keep files small.
fn motion(rng: &mut ChaCha8Rng, frames: usize) -> Vec<PoseFrame> {
    let waves: Vec<[(f64, f64, f64); 3]> = (0..JOINT_COUNT)
        .map(|_| {
            std::array::from_fn(|_| {
                (
                    rng.random_range(0.02..0.12),
                    rng.random_range(0.3..2.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
        })
        .collect();
    let turn_rate = rng.random_range(-0.4..0.4);
    let drift = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
    (0..frames)
        .map(|f| {
            let t = f as f64 / FPS;
            let (s, c) = (turn_rate * t).sin_cos();
            let joints = std::array::from_fn(|j| {
                let mut p = REST_POSE[j];
                for (axis, (amp, freq, phase)) in waves[j].iter().enumerate() {
                    p[axis] += amp * (std::f64::consts::TAU * freq * t + phase).sin();
                }
                [
                    round4(c * p[0] + s * p[2] + drift[0] * t),
                    round4(p[1]),
                    round4(-s * p[0] + c * p[2] + drift[1] * t),
                ]
            });
            PoseFrame::new(joints).expect("finite")
        })
        .collect()
}

/// Quarter turn about the vertical axis, scale 1.25, then a shift.
fn plant(frame: &PoseFrame, shift: [f64; 3]) -> PoseFrame {
    let joints = frame
        .joints()
        .map(|[x, y, z]| [1.25 * z + shift[0], 1.25 * y + shift[1], -1.25 * x + shift[2]]);
    PoseFrame::new(joints).expect("finite")
}

fn feature_vectors(rng: &mut ChaCha8Rng, base: &[f64]) -> FeatureSet {
    let vectors = (0..4)
        .map(|_| base.iter().map(|b| round4(b + rng.random_range(-0.05..0.05))).collect())
        .collect();
    FeatureSet::new(vectors).expect("non-empty")
}

/// Writes the corpus (poses, features, manifests, config) into `dir`.
pub fn write_planted_corpus(dir: &Path, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demos = Vec::new();
    let mut commentary = Vec::new();
    let scenario = "basketball";
    let record = |text: &str, t: f64, id: &str| {
        CommentaryRecord::new(text, t, id, "coach_1", scenario).expect("valid record")
    };

    for (i, (learner_text, expert_text, _)) in PAIRS.iter().enumerate() {
        let (lid, eid) = (learner_id(i), expert_id(i));
        let learner = motion(&mut rng, LEARNER_FRAMES);
        let mut expert = motion(&mut rng, EXPERT_FRAMES);
        let shift = [
            round4(rng.random_range(-1.0..1.0)),
            round4(rng.random_range(-0.2..0.2)),
            round4(rng.random_range(-1.0..1.0)),
        ];
        for k in 0..WINDOW_FRAMES {
            expert[COPY_START + k] = plant(&learner[32 + k], shift);
        }

        let base: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (id, frames, skill, features_of) in [
            (&lid, learner, [SkillLevel::Novice, SkillLevel::EarlyExpert][i % 2], &base),
            (&eid, expert, [SkillLevel::IntermediateExpert, SkillLevel::LateExpert][i % 2], &base),
        ] {
            let seq = PoseSequence::new(frames, FPS, id.as_str())?;
            pose::write(&dir.join(format!("poses/{id}.pose")), &seq)?;
            features::write(&dir.join(format!("features/{id}.feat")), &feature_vectors(&mut rng, features_of))?;
            demos.push(DemoEntry {
                demo_id: id.clone(),
                pose_path: format!("poses/{id}.pose"),
                skill,
                scenario: scenario.into(),
                participant_id: Some(format!("participant_{}", demos.len())),
                features_path: Some(format!("features/{id}.feat")),
            });
        }
        commentary.push(record(learner_text, LEARNER_TIME_S, &lid));
        commentary.push(record(expert_text, EXPERT_TIME_S, &eid));
    }
    // Distractors: a flagged region nobody praises, a praised region nobody flags, and a remark
    // the labeler cannot parse.
    commentary.push(record("The jump itself is too low.", 1.5, &learner_id(0)));
    commentary.push(record("Solid shoulder turn before the release.", 2.0, &expert_id(2)));
    commentary.push(record("Okay, let's watch that one again.", 2.0, &expert_id(1)));

    jsonl::write(&dir.join("demos.jsonl"), &demos)?;
    jsonl::write(&dir.join("commentary.jsonl"), &commentary)?;
    write_text(&dir.join("config.toml"), &planted_config().to_toml())?;
    Ok(())
}

/// Default settings, except that retrieval queries every tuple (the corpus is too small for a
/// useful test split) and paths point at the corpus files.
pub fn planted_config() -> PipelineConfig {
    let mut config = PipelineConfig {
        queries: QuerySet::All,
        ..PipelineConfig::default()
    };
    config.paths.output_dir = "out".into();
    config
}
