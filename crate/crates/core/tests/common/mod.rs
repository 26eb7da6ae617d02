//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the code paths it checks: Procrustes is re-derived with a hand-rolled
//! Jacobi eigen-solver and a brute-force rotation grid, windows and collections are enumerated
//! exhaustively, and top-k is a plain sort-and-truncate.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use coachmine_core::commentary::{BodyRegion, CommentaryLabel, CommentaryRecord, RegionLabel};
use coachmine_core::pairing::{Demonstration, LabeledCommentary, SkillLevel};
use coachmine_core::pose::{PoseFrame, PoseSequence, JOINT_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect()
}

pub fn random_frame(rng: &mut impl Rng) -> PoseFrame {
    let pts = random_points(rng, JOINT_COUNT);
    PoseFrame::new(pts.try_into().unwrap()).unwrap()
}

pub fn random_sequence(rng: &mut impl Rng, n: usize) -> PoseSequence {
    PoseSequence::new((0..n).map(|_| random_frame(rng)).collect(), 32.0, "rand").unwrap()
}

// ---------------------------------------------------------------------------------------------
// 3×3 linear algebra

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix.
/// Returns eigenvalues (descending) and eigenvectors as columns of the returned matrix.
pub fn jacobi_eigen(mut a: Mat3) -> (Vec3, Mat3) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A ← Jᵀ A J with J the (p, q) rotation.
            let mut j = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            j[p][p] = c;
            j[q][q] = c;
            j[p][q] = s;
            j[q][p] = -s;
            a = mat_mul(&transpose(&j), &mat_mul(&a, &j));
            v = mat_mul(&v, &j);
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut vectors = [[0.0; 3]; 3];
    for (col, &o) in order.iter().enumerate() {
        for row in 0..3 {
            vectors[row][col] = v[row][o];
        }
    }
    (values, vectors)
}

fn column(m: &Mat3, c: usize) -> Vec3 {
    [m[0][c], m[1][c], m[2][c]]
}

fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
    [[c0[0], c1[0], c2[0]], [c0[1], c1[1], c2[1]], [c0[2], c1[2], c2[2]]]
}

fn centered(points: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    (mean, points.iter().map(|p| sub(p, &mean)).collect())
}

/// Similarity Procrustes via SVD assembled from a Jacobi eigen-decomposition of HᵀH.
/// Returns (scale, rotation, translation).
pub fn oracle_procrustes(source: &[Vec3], target: &[Vec3]) -> (f64, Mat3, Vec3) {
    let (ms, xs) = centered(source);
    let (mt, ys) = centered(target);
    let mut h = [[0.0; 3]; 3];
    for (x, y) in xs.iter().zip(&ys) {
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += y[i] * x[j];
            }
        }
    }
    let (lambda, mut v) = jacobi_eigen(mat_mul(&transpose(&h), &h));
    if det(&v) < 0.0 {
        for row in v.iter_mut() {
            row[2] = -row[2];
        }
    }
    let sigma: Vec<f64> = lambda.iter().map(|l| l.max(0.0).sqrt()).collect();
    let u1 = scale(&mat_vec(&h, &column(&v, 0)), 1.0 / sigma[0]);
    let mut u2 = scale(&mat_vec(&h, &column(&v, 1)), 1.0 / sigma[1]);
    // Gram-Schmidt against round-off.
    u2 = sub(&u2, &scale(&u1, dot(&u1, &u2)));
    u2 = scale(&u2, 1.0 / norm(&u2));
    let u3 = cross(&u1, &u2);
    let third_sign = dot(&u3, &mat_vec(&h, &column(&v, 2))).signum();
    let u = from_columns(u1, u2, u3);
    let rotation = mat_mul(&u, &transpose(&v));
    let var_s: f64 = xs.iter().map(|x| dot(x, x)).sum();
    let s = (sigma[0] + sigma[1] + third_sign * sigma[2]) / var_s;
    let translation = sub(&mt, &scale(&mat_vec(&rotation, &ms), s));
    (s, rotation, translation)
}

/// Mean per-point distance (meters) after the oracle alignment.
pub fn oracle_aligned_error(source: &[Vec3], target: &[Vec3]) -> f64 {
    let (s, r, t) = oracle_procrustes(source, target);
    let total: f64 = source
        .iter()
        .zip(target)
        .map(|(x, y)| {
            let m = mat_vec(&r, x);
            norm(&sub(&[s * m[0] + t[0], s * m[1] + t[1], s * m[2] + t[2]], y))
        })
        .sum();
    total / source.len() as f64
}

/// Frame-wise PA-MPJPE in mm.
pub fn oracle_pa_mpjpe_per_frame(a: &[PoseFrame], b: &[PoseFrame]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(fa, fb)| oracle_aligned_error(fa.joints(), fb.joints()))
        .sum();
    total / a.len() as f64 * 1000.0
}

/// Whole-sequence PA-MPJPE in mm.
pub fn oracle_pa_mpjpe_per_sequence(a: &[PoseFrame], b: &[PoseFrame]) -> f64 {
    let xa: Vec<Vec3> = a.iter().flat_map(|f| f.joints().iter().copied()).collect();
    let xb: Vec<Vec3> = b.iter().flat_map(|f| f.joints().iter().copied()).collect();
    oracle_aligned_error(&xa, &xb) * 1000.0
}

/// ZYX Euler rotation (degrees).
pub fn euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Mat3 {
    let (a, b, c) = (yaw.to_radians(), pitch.to_radians(), roll.to_radians());
    let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rx = [[1.0, 0.0, 0.0], [0.0, c.cos(), -c.sin()], [0.0, c.sin(), c.cos()]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

/// Least-squares residual for a fixed rotation with closed-form (non-negative) scale and
/// translation, on centered point sets.
fn residual_given_rotation(r: &Mat3, xs: &[Vec3], ys: &[Vec3], var_s: f64) -> f64 {
    let rx: Vec<Vec3> = xs.iter().map(|x| mat_vec(r, x)).collect();
    let s = (rx.iter().zip(ys).map(|(a, b)| dot(a, b)).sum::<f64>() / var_s).max(0.0);
    rx.iter()
        .zip(ys)
        .map(|(a, b)| {
            let d = sub(&scale(a, s), b);
            dot(&d, &d)
        })
        .sum()
}

/// Minimal similarity residual found by grid search over Euler angles: a 10° global grid, then
/// successively finer local grids down to 0.05° around the best few coarse cells.
pub fn grid_search_residual(source: &[Vec3], target: &[Vec3]) -> f64 {
    let (_, xs) = centered(source);
    let (_, ys) = centered(target);
    let var_s: f64 = xs.iter().map(|x| dot(x, x)).sum();
    let eval = |yaw: f64, pitch: f64, roll: f64| {
        residual_given_rotation(&euler_zyx(yaw, pitch, roll), &xs, &ys, var_s)
    };

    let mut coarse = Vec::new();
    let mut yaw = -180.0;
    while yaw < 180.0 {
        let mut pitch = -90.0;
        while pitch <= 90.0 {
            let mut roll = -180.0;
            while roll < 180.0 {
                coarse.push((eval(yaw, pitch, roll), [yaw, pitch, roll]));
                roll += 10.0;
            }
            pitch += 10.0;
        }
        yaw += 10.0;
    }
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best = f64::INFINITY;
    for &(start_value, start) in coarse.iter().take(8) {
        let mut current = (start_value, start);
        let mut span: f64 = 10.0;
        for step in [2.0, 0.4, 0.1, 0.05] {
            let center = current.1;
            let n = (span / step).round() as i32;
            for i in -n..=n {
                for j in -n..=n {
                    for k in -n..=n {
                        let angles = [
                            center[0] + i as f64 * step,
                            center[1] + j as f64 * step,
                            center[2] + k as f64 * step,
                        ];
                        let v = eval(angles[0], angles[1], angles[2]);
                        if v < current.0 {
                            current = (v, angles);
                        }
                    }
                }
            }
            span = step * 2.0;
        }
        best = best.min(current.0);
    }
    best
}

// ---------------------------------------------------------------------------------------------
// Enumeration oracles

/// Exhaustive window scan: (start, score) of the minimal-score window, earliest on ties.
pub fn brute_force_window(
    learner: &[PoseFrame],
    expert: &[PoseFrame],
    stride: usize,
    anchor: Option<usize>,
    per_sequence: bool,
) -> Option<(usize, f64)> {
    let len = learner.len();
    let mut best: Option<(usize, f64)> = None;
    if expert.len() < len {
        return None;
    }
    for start in 0..=expert.len() - len {
        if start % stride != 0 {
            continue;
        }
        if let Some(a) = anchor {
            if !(start < a && a < start + len - 1) {
                continue;
            }
        }
        let window = &expert[start..start + len];
        let score = if per_sequence {
            oracle_pa_mpjpe_per_sequence(learner, window)
        } else {
            oracle_pa_mpjpe_per_frame(learner, window)
        };
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((start, score));
        }
    }
    best
}

/// Per-group sort-and-truncate: returns the kept input indices, ascending.
pub fn sort_topk<G: Ord + Clone>(groups: &[G], scores: &[f64], k: usize) -> Vec<usize> {
    let mut by_group: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g.clone()).or_default().push(i);
    }
    let mut kept = Vec::new();
    for (_, mut idx) in by_group {
        // Insertion sort: stable by construction.
        for i in 1..idx.len() {
            let mut j = i;
            while j > 0 && scores[idx[j - 1]] > scores[idx[j]] {
                idx.swap(j - 1, j);
                j -= 1;
            }
        }
        kept.extend(idx.into_iter().take(k));
    }
    kept.sort();
    kept
}

/// (learner id, learner commentary, expert id, expert commentary, region).
pub type Triple = (String, usize, String, usize, BodyRegion);

/// Set-builder form of the collection: every (demo, demo, commentary, commentary, region)
/// combination that satisfies the membership predicate.
pub fn set_builder_collection(demos: &[Demonstration]) -> BTreeSet<Triple> {
    let mut out = BTreeSet::new();
    for a in demos {
        for b in demos {
            for (i, ca) in a.commentaries.iter().enumerate() {
                for (j, cb) in b.commentaries.iter().enumerate() {
                    for region in BodyRegion::ALL {
                        if membership(a, ca, b, cb, region) {
                            out.insert((a.demo_id.clone(), i, b.demo_id.clone(), j, region));
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn membership(
    a: &Demonstration,
    ca: &LabeledCommentary,
    b: &Demonstration,
    cb: &LabeledCommentary,
    region: BodyRegion,
) -> bool {
    let learner_pool = [SkillLevel::Novice, SkillLevel::EarlyExpert];
    let expert_pool = [SkillLevel::IntermediateExpert, SkillLevel::LateExpert];
    let same_participant = matches!((&a.participant_id, &b.participant_id), (Some(x), Some(y)) if x == y);
    learner_pool.contains(&a.skill)
        && expert_pool.contains(&b.skill)
        && a.scenario == b.scenario
        && !same_participant
        && ca.label.label(region) == RegionLabel::NeedsImprovement
        && cb.label.label(region) == RegionLabel::Correct
}

// ---------------------------------------------------------------------------------------------
// Random corpora

pub fn random_label(rng: &mut impl Rng) -> CommentaryLabel {
    let mut label = CommentaryLabel::new("Some feedback.").unwrap();
    for region in BodyRegion::ALL {
        let l = match rng.random_range(0..3) {
            0 => RegionLabel::NeedsImprovement,
            1 => RegionLabel::Correct,
            _ => RegionLabel::NoMention,
        };
        label.set(region, l);
    }
    label
}

/// Demos with random skill, scenario, participant and 0–3 random labels; `frames` pose frames.
pub fn random_corpus(rng: &mut impl Rng, n: usize, frames: usize) -> Vec<Demonstration> {
    let scenarios = ["basketball", "soccer"];
    (0..n)
        .map(|i| {
            let id = format!("d{i:02}");
            let scenario = scenarios[rng.random_range(0..2)].to_string();
            let commentaries = (0..rng.random_range(0..4))
                .map(|_| LabeledCommentary {
                    record: CommentaryRecord::new(
                        "c",
                        rng.random_range(0.0..frames as f64 / 32.0),
                        id.clone(),
                        "x",
                        scenario.clone(),
                    )
                    .unwrap(),
                    label: random_label(rng),
                })
                .collect();
            Demonstration {
                demo_id: id,
                participant_id: (rng.random_range(0..3) > 0).then(|| format!("p{}", rng.random_range(0..4))),
                pose: random_sequence(rng, frames),
                skill: SkillLevel::ALL[rng.random_range(0..4)],
                scenario,
                commentaries,
                video_features: None,
            }
        })
        .collect()
}
