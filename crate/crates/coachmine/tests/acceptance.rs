//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so each criterion prints `PASS` or `FAIL` with the
//! measured value next to its pinned tolerance. Exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coachmine::config::{ConfigReport, PipelineConfig};
use coachmine::formats::{jsonl, pose};
use coachmine::pipeline::run_all;
use coachmine::records::{RankRecord, TupleRecord};
use coachmine::synthetic::{self, planted_pairs};
use coachmine_core::align::{best_window, SearchOptions, Window};
use coachmine_core::codec::{decode, encode, normalize_frame, train_codebook};
use coachmine_core::commentary::{
    build_prompt, parse_label_response, BodyRegion, ChatMessage, CommentaryRecord, RegionLabel, Role, StubLabeler,
};
use coachmine_core::pairing::build_collection;
use coachmine_core::pose::{pa_mpjpe_frames, procrustes_fit, AlignMode, PoseFrame, PoseSequence, Scaling};
use coachmine_core::retrieval::{median_rank, recall_at_k};
use coachmine_core::text::{bleu4, bleu4_with, rouge_l_f1, BleuSmoothing};
use common::*;
use rand::Rng;

const INVARIANCE_TOL_MM: f64 = 1e-6;
const INVARIANCE_BUDGET: Duration = Duration::from_secs(10);
const GRID_SLACK: f64 = 1e-6;
const GRID_BUDGET: Duration = Duration::from_secs(120);
const WINDOW_SCORE_TOL_MM: f64 = 1e-6;
const WINDOW_BUDGET: Duration = Duration::from_secs(60);
const PLANTED_SCORE_TOL_MM: f64 = 1e-6;
const CODEC_ZERO_TOL_MM: f64 = 1e-6;
const TEXT_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/planted")
}

fn transform_frame(frame: &PoseFrame, scale: f64, rotation: &Mat3, shift: Vec3) -> PoseFrame {
    let joints = frame.joints().map(|p| {
        let q = mat_vec(rotation, &p);
        [scale * q[0] + shift[0], scale * q[1] + shift[1], scale * q[2] + shift[2]]
    });
    PoseFrame::new(joints).unwrap()
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    euler_zyx(
        rng.random_range(-180.0..180.0),
        rng.random_range(-90.0..90.0),
        rng.random_range(-180.0..180.0),
    )
}

fn procrustes_invariance() -> Outcome {
    let mut rng = rng(1);
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let frame = random_frame(&mut rng);
        let rotation = random_rotation(&mut rng);
        let scale = rng.random_range(0.2..5.0);
        let shift = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let moved = transform_frame(&frame, scale, &rotation, shift);
        let err = pa_mpjpe_frames(&[frame], &[moved], AlignMode::PerFrame, Scaling::Similarity)
            .map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    let elapsed = started.elapsed();
    check(
        worst < INVARIANCE_TOL_MM && elapsed < INVARIANCE_BUDGET,
        format!("max {worst:.2e} mm over 1000 frames in {elapsed:.2?}"),
    )
}

fn procrustes_oracle() -> Outcome {
    let mut rng = rng(2);
    let started = Instant::now();
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let source = random_points(&mut rng, 5);
        let rotation = random_rotation(&mut rng);
        let scale = rng.random_range(0.5..2.0);
        let target: Vec<Vec3> = source
            .iter()
            .map(|p| {
                let q = mat_vec(&rotation, p);
                std::array::from_fn(|i| scale * q[i] + 0.3 + rng.random_range(-0.1..0.1))
            })
            .collect();
        let fit = procrustes_fit(&source, &target).map_err(|e| e.to_string())?;
        worst_excess = worst_excess.max(fit.residual - grid_search_residual(&source, &target));
    }
    let elapsed = started.elapsed();
    check(
        worst_excess <= GRID_SLACK && elapsed < GRID_BUDGET,
        format!("max residual minus grid residual {worst_excess:.2e} over 100 clouds in {elapsed:.2?}"),
    )
}

fn window_search() -> Outcome {
    let mut rng = rng(3);
    let started = Instant::now();
    let (mut anchored, mut mismatches) = (0, Vec::new());
    for case in 0..500 {
        let learner = random_sequence(&mut rng, 5);
        let expert_len = rng.random_range(5..=200);
        let expert = random_sequence(&mut rng, expert_len);
        let stride = rng.random_range(1..=4);
        let anchor = rng.random_bool(0.5).then(|| rng.random_range(0..expert.len()));
        let per_sequence = rng.random_bool(0.5);
        let options = SearchOptions {
            anchor_frame: anchor,
            stride,
            mode: if per_sequence { AlignMode::PerSequence } else { AlignMode::PerFrame },
            scaling: Scaling::Similarity,
        };
        let got = best_window(&learner, Window::new(0, 5), &expert, &options).ok();
        let want = brute_force_window(learner.frames(), expert.frames(), stride, anchor, per_sequence);
        if anchor.is_some() && want.is_some() {
            anchored += 1;
        }
        let agree = match (got, want) {
            (None, None) => true,
            (Some(g), Some((start, score))) => {
                g.expert_window == Window::new(start, 5) && (g.score_mm - score).abs() < WINDOW_SCORE_TOL_MM
            }
            _ => false,
        };
        if !agree {
            mismatches.push(case);
        }
    }
    let elapsed = started.elapsed();
    check(
        mismatches.is_empty() && anchored > 0 && elapsed < WINDOW_BUDGET,
        format!("500 instances ({anchored} anchored), mismatches {mismatches:?}, {elapsed:.2?}"),
    )
}

fn pairing_equivalence() -> Outcome {
    let mut rng = rng(4);
    let mut sizes = 0;
    for case in 0..200 {
        let n = rng.random_range(0..=15);
        let demos = random_corpus(&mut rng, n, 4);
        let got: Vec<Triple> = build_collection(&demos)
            .into_iter()
            .map(|e| (e.learner_id, e.learner_commentary, e.expert_id, e.expert_commentary, e.region))
            .collect();
        let got_set: BTreeSet<Triple> = got.iter().cloned().collect();
        if got_set.len() != got.len() || got_set != set_builder_collection(&demos) {
            return Err(format!("corpus {case} differs from the set-builder collection"));
        }
        sizes += got.len();
    }
    Ok(format!("200 corpora equal, {sizes} entries in total"))
}

fn planted_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = PipelineConfig::load(Some(&fixture().join("config.toml")), &[]).map_err(|e| e.to_string())?;
    run_all(&config, &StubLabeler::default(), dir.path(), &BTreeSet::new()).map_err(|e| e.to_string())?;
    let tuples: Vec<TupleRecord> = jsonl::read(&dir.path().join("dataset.jsonl")).map_err(|e| e.to_string())?;

    let mut got: Vec<_> = tuples
        .iter()
        .map(|t| {
            let t = &t.tuple;
            (t.learner_id.clone(), t.expert_id.clone(), t.matched_region, t.learner_window, t.expert_window)
        })
        .collect();
    got.sort_by(|a, b| a.0.cmp(&b.0));
    let want: Vec<_> = planted_pairs()
        .into_iter()
        .map(|p| (p.learner_id, p.expert_id, p.region, p.learner_window, p.expert_window))
        .collect();
    if got != want {
        return Err(format!("tuples {got:?} differ from planted {want:?}"));
    }
    let worst = tuples.iter().map(|t| t.tuple.alignment_score_mm).fold(0.0, f64::max);
    if worst >= PLANTED_SCORE_TOL_MM {
        return Err(format!("planted score {worst:.2e} mm"));
    }

    // The exhaustive anchored scan must find the same windows on the files themselves.
    let anchor = (synthetic::EXPERT_TIME_S * synthetic::FPS).floor() as usize;
    for p in planted_pairs() {
        let read = |id: &str| pose::read(&fixture().join(format!("poses/{id}.pose")), id);
        let learner = read(&p.learner_id).map_err(|e| e.to_string())?;
        let expert = read(&p.expert_id).map_err(|e| e.to_string())?;
        let w = p.learner_window;
        let window = &learner.frames()[w.start_frame..w.start_frame + w.length_frames];
        let found = brute_force_window(window, expert.frames(), 1, Some(anchor), false);
        if found.map(|(s, _)| s) != Some(p.expert_window.start_frame) {
            return Err(format!("oracle scan for {} found {found:?}", p.learner_id));
        }
    }

    let ranks: Vec<RankRecord> = jsonl::read(&dir.path().join("ranks.jsonl")).map_err(|e| e.to_string())?;
    let results: Vec<_> = ranks.into_iter().map(|r| r.result).collect();
    let recall = recall_at_k(&results, 1).map_err(|e| e.to_string())?;
    let med = median_rank(&results).map_err(|e| e.to_string())?;
    check(
        recall == 100.0 && med == 1.0,
        format!("4 planted tuples, max score {worst:.2e} mm, recall@1 {recall}%, medR {med}"),
    )
}

fn reconstruction_errors(frames: &[PoseFrame], m: usize, seed: u64) -> Result<Vec<f64>, String> {
    let codebook = train_codebook(frames, m, seed).map_err(|e| e.to_string())?;
    let seq = PoseSequence::new(frames.to_vec(), 32.0, "corpus").map_err(|e| e.to_string())?;
    let tokens = encode(&seq, &codebook).map_err(|e| e.to_string())?;
    let decoded = decode(&tokens, &codebook, 1.0, [0.0; 3]).map_err(|e| e.to_string())?;
    frames
        .iter()
        .zip(decoded.frames())
        // Align the reconstruction onto the original. The reverse lets the fit shrink the original
        // toward a compact centroid and hide the error.
        .map(|(a, b)| {
            pa_mpjpe_frames(&[*b], &[*a], AlignMode::PerFrame, Scaling::Similarity).map_err(|e| e.to_string())
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn codec_suite() -> Outcome {
    let mut rng = rng(6);
    let train: Vec<PoseFrame> = (0..400).map(|_| random_frame(&mut rng)).collect();
    let codebook = train_codebook(&train, 32, 1).map_err(|e| e.to_string())?;

    // decode(encode(x)) is a fixed point of encode.
    for case in 0..1000 {
        let len = rng.random_range(1..8);
        let seq = random_sequence(&mut rng, len);
        let tokens = encode(&seq, &codebook).map_err(|e| e.to_string())?;
        let scale = rng.random_range(0.5..2.0);
        let decoded = decode(&tokens, &codebook, scale, [0.1, -0.2, 0.3]).map_err(|e| e.to_string())?;
        if encode(&decoded, &codebook).map_err(|e| e.to_string())?.tokens != tokens.tokens {
            return Err(format!("round trip changed tokens for sequence {case}"));
        }
    }

    for m in [1, 4, 16, 64] {
        let cb = train_codebook(&train[..200], m, 2).map_err(|e| e.to_string())?;
        let seq = random_sequence(&mut rng, 50);
        let tokens = encode(&seq, &cb).map_err(|e| e.to_string())?;
        for (frame, &token) in seq.frames().iter().zip(&tokens.tokens) {
            let v = normalize_frame(frame).map_err(|e| e.to_string())?.values;
            let d: Vec<f64> =
                cb.centroids().iter().map(|c| c.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum()).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            if d.iter().position(|&x| x == min) != Some(token as usize) {
                return Err(format!("M={m}: token {token} is not the nearest centroid"));
            }
        }
    }

    let small: Vec<PoseFrame> = (0..60).map(|_| random_frame(&mut rng)).collect();
    let full = reconstruction_errors(&small, small.len(), 3)?.into_iter().fold(0.0, f64::max);
    if full >= CODEC_ZERO_TOL_MM {
        return Err(format!("M = corpus size leaves {full:.2e} mm reconstruction error"));
    }

    let sizes = [8, 32, 128, 512];
    let mut medians = Vec::new();
    for seed in 0..10 {
        let corpus: Vec<PoseFrame> = (0..1024).map(|_| random_frame(&mut rng)).collect();
        let row = sizes
            .iter()
            .map(|&m| reconstruction_errors(&corpus, m, seed).map(median))
            .collect::<Result<Vec<_>, _>>()?;
        if row.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("seed {seed}: medians {row:?} increase with M"));
        }
        medians.push(row);
    }
    let first = &medians[0];
    Ok(format!(
        "1000 round trips stable, nearest-centroid exact for M<=64, M=N error {full:.1e} mm, \
         medians non-increasing on 10 seeds (seed 0: {:.1}/{:.1}/{:.1}/{:.1} mm)",
        first[0], first[1], first[2], first[3]
    ))
}

fn text_metrics() -> Outcome {
    let e = |r: Result<f64, coachmine_core::Error>| r.map_err(|e| e.to_string());
    let bleu = e(bleu4("the cat sat on the mat", &["the cat sat on a mat"]))?;
    let want = (5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0f64).powf(0.25);
    let rouge = e(rouge_l_f1("a b c d", "a c d e"))?;
    let identity = (e(bleu4("keep your elbow in", &["keep your elbow in"]))?, e(rouge_l_f1("keep your elbow in", "keep your elbow in"))?);
    let disjoint = (
        e(bleu4_with("jump higher now", &["bend the knees"], BleuSmoothing::None))?,
        e(rouge_l_f1("jump higher now", "bend the knees"))?,
    );
    if (bleu - want).abs() > TEXT_TOL || (rouge - 0.75).abs() > TEXT_TOL {
        return Err(format!("bleu {bleu} vs {want}, rouge {rouge} vs 0.75"));
    }
    if identity != (1.0, 1.0) || disjoint != (0.0, 0.0) {
        return Err(format!("identity {identity:?}, disjoint {disjoint:?}"));
    }

    let mut rng = rng(7);
    let vocab = ["a", "b", "c", "d", "e", "knee", "arm", "the", "ball"];
    let sentence = |rng: &mut rand_chacha::ChaCha8Rng| {
        let n = rng.random_range(1..12);
        (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    for _ in 0..10_000 {
        let (h, r) = (sentence(&mut rng), sentence(&mut rng));
        let scores = [
            e(bleu4(&h, &[&r]))?,
            e(bleu4_with(&h, &[&r], BleuSmoothing::None))?,
            e(rouge_l_f1(&h, &r))?,
        ];
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(format!("{h:?} vs {r:?} scored {scores:?}"));
        }
    }
    Ok(format!("bleu {bleu:.12}, rouge {rouge}, identity and disjoint exact, 10000 pairs in [0,1]"))
}

fn prompt_and_parse() -> Outcome {
    let record = CommentaryRecord::new("Keep the elbow tucked in.", 1.0, "v", "c", "rock climbing").unwrap();
    let user_1 = "The following is an expert commentary about a person playing Rock Climbing. Give a one sentence \
summary of the expert feedback and then mention which body parts out of Head, Shoulder, Hands, Arms, Legs, Jump \
needs improvement and which ones are good execution (you can choose multiple body parts). Here is the expert's \
commentary:\n\nHe came down on one foot that time. You want to make sure you come down on two feet. Right now \
he's putting a little bit too much pressure and stress. Then on top of that, his left knee is locked, which could \
easily cause some hypertension. So be very aware and careful of your landing.";
    let answer_1 = r"One sentence summary: He came down on one foot and his left knee is locked, which could cause some hypertension. \n Needs improvement parts: Legs, Jump. \n Good execution parts: None.";
    let user_2 = "Let's take a look at the placement of the shooter's left guy hand. You can see that it's in a really \
good position on the left side of the ball. If you take a look at the shooting hand, his right hand is underneath \
the ball with his right index finger in the middle section of the ball. His right index finger is in the middle \
section of the ball. This is good positioning of both his right shooting hand and his left guy hand on the ball.";
    let answer_2 = r"One sentence summary: Shooter's hand is in a really good position on the left side of the ball. \n Needs improvement parts: None. \n Good execution parts: Hands.";
    let want = vec![
        ChatMessage::new(Role::System, "You are a helpful assistant."),
        ChatMessage::new(Role::User, user_1),
        ChatMessage::new(Role::Assistant, answer_1),
        ChatMessage::new(Role::User, user_2),
        ChatMessage::new(Role::Assistant, answer_2),
        ChatMessage::new(Role::User, "Keep the elbow tucked in."),
    ];
    let got = build_prompt(&record);
    if got != want {
        let at = got.iter().zip(&want).position(|(a, b)| a != b);
        return Err(format!("prompt differs at message {at:?}"));
    }

    let regions = |answer: &str, label: RegionLabel| -> Option<Vec<BodyRegion>> {
        parse_label_response(answer).label().map(|l| l.regions_with(label).collect())
    };
    let first = (regions(answer_1, RegionLabel::NeedsImprovement), regions(answer_1, RegionLabel::Correct));
    let second = (regions(answer_2, RegionLabel::NeedsImprovement), regions(answer_2, RegionLabel::Correct));
    if first != (Some(vec![BodyRegion::Legs, BodyRegion::Jump]), Some(vec![])) {
        return Err(format!("first exemplar parsed to {first:?}"));
    }
    if second != (Some(vec![]), Some(vec![BodyRegion::Hands])) {
        return Err(format!("second exemplar parsed to {second:?}"));
    }
    let quote = "oh, I will give this a five out of ten";
    check(
        parse_label_response(quote).is_discarded(),
        "6 messages byte-identical, both exemplars parse, headerless quote discarded".into(),
    )
}

fn determinism() -> Outcome {
    let config = PipelineConfig::load(Some(&fixture().join("config.toml")), &[]).map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        run_all(&config, &StubLabeler::default(), dir.path(), &BTreeSet::new()).map_err(|e| e.to_string())?;
    }
    let names = ["labels.jsonl", "collection.jsonl", "dataset.jsonl", "skips.jsonl", "review.jsonl", "ranks.jsonl", "report.json"];
    for name in names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!("{} output files byte-identical across two runs", names.len()))
}

fn default_configuration() -> Outcome {
    let text = toml::to_string(&ConfigReport::new(&PipelineConfig::default())).map_err(|e| e.to_string())?;
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let config = &value["config"];
    let strings = |v: &toml::Value| -> Vec<String> {
        v.as_array().into_iter().flatten().filter_map(|s| s.as_str().map(String::from)).collect()
    };
    let got = (
        config["window_length_s"].as_float(),
        config["fps"].as_float(),
        config["k_train"].as_integer(),
        config["k_test"].as_integer(),
        strings(&value["taxonomy"]["body_regions"]),
        strings(&value["taxonomy"]["skill_levels"]),
    );
    let want = (
        Some(4.0),
        Some(32.0),
        Some(5),
        Some(1),
        ["Head", "Shoulder", "Hands", "Arms", "Legs", "Jump"].map(String::from).to_vec(),
        ["novice", "early_expert", "intermediate_expert", "late_expert"].map(String::from).to_vec(),
    );
    check(got == want, format!("{got:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("procrustes invariance", procrustes_invariance),
        ("procrustes vs rotation grid", procrustes_oracle),
        ("window search exactness", window_search),
        ("pairing equivalence", pairing_equivalence),
        ("planted pairs end to end", planted_end_to_end),
        ("codec suite", codec_suite),
        ("text metrics", text_metrics),
        ("prompt and parse fidelity", prompt_and_parse),
        ("determinism", determinism),
        ("default configuration", default_configuration),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({took:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({took:.2?})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
