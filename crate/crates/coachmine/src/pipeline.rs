//! Pipeline stages. Each stage is a function over in-memory records returning its output and a
//! [`StageReport`]; [`run_all`] chains them and writes every artifact to one directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use coachmine_core::align::SearchOptions;
use coachmine_core::codec::{train_codebook, Codebook};
use coachmine_core::commentary::{
    build_prompt_with_system, parse_label_response, CommentaryRecord, LabelOutcome, LabelingClient, ParseWarning,
};
use coachmine_core::pairing::{
    align_entry, assemble_dataset, build_collection, index_demos, CoachingTuple, CollectionEntry, DatasetBuild,
    Demonstration, Split,
};
use coachmine_core::pose::PoseFrame;
use coachmine_core::retrieval::{median_rank, recall_at_k, retrieve, Scorer};
use coachmine_core::text::{bleu4_with, rouge_l_f1, BleuSmoothing, TOKENIZER};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, QuerySet, ScorerKind};
use crate::error::{Error, Result};
use crate::formats::{self, jsonl};
use crate::records::{
    load_corpus, Corpus, LabelRecord, LabelStatus, RankRecord, ReviewItem, TextPair, TupleRecord,
};

pub const TOOL_VERSION: &str = concat!("coachmine ", env!("CARGO_PKG_VERSION"));

/// Record counts for one stage. `inputs == outputs + skips` always holds; `written` counts the
/// lines of the stage's main output file, which may differ (one label can yield many pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub inputs: usize,
    pub outputs: usize,
    pub skips: usize,
    pub skip_reasons: BTreeMap<String, usize>,
    pub written: usize,
    pub duration_ms: u64,
}

impl StageReport {
    fn new(stage: &str, started: Instant) -> Self {
        Self {
            stage: stage.into(),
            inputs: 0,
            outputs: 0,
            skips: 0,
            skip_reasons: BTreeMap::new(),
            written: 0,
            duration_ms: started.elapsed().as_millis() as u64,
        }
    }

    fn skip(&mut self, reason: &str) {
        self.skips += 1;
        *self.skip_reasons.entry(reason.into()).or_insert(0) += 1;
    }

    pub fn balanced(&self) -> bool {
        self.inputs == self.outputs + self.skips && self.skip_reasons.values().sum::<usize>() == self.skips
    }
}

/// Summary of a full run. Timings vary between runs; everything else is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<StageReport>,
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn balanced(&self) -> bool {
        self.stages.iter().all(StageReport::balanced)
    }
}

// ---------------------------------------------------------------------------------------------
// label

/// Reads the commentary manifest, keeping 1-indexed line numbers.
pub fn read_commentary(path: &Path) -> Result<Vec<(usize, CommentaryRecord)>> {
    let text = formats::read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let record: CommentaryRecord =
                serde_json::from_str(l).map_err(|e| Error::format(path, Some(i + 1), e))?;
            record.validate().map_err(|e| Error::format(path, Some(i + 1), e))?;
            Ok((i + 1, record))
        })
        .collect()
}

fn warning_text(w: &ParseWarning) -> String {
    match w {
        ParseWarning::MultiSentenceSummary { dropped } => format!("multi_sentence_summary: dropped {dropped:?}"),
    }
}

/// Labels every record. Requests run in parallel; output keeps input order.
pub fn label(
    records: &[(usize, CommentaryRecord)],
    client: &(impl LabelingClient + Sync),
    system_prompt: &str,
) -> (Vec<LabelRecord>, StageReport) {
    let started = Instant::now();
    let labels: Vec<LabelRecord> = records
        .par_iter()
        .map(|(line, record)| {
            let messages = build_prompt_with_system(record, system_prompt);
            let base = LabelRecord {
                line: *line,
                record: record.clone(),
                status: LabelStatus::Failed,
                label: None,
                reason: None,
                warnings: Vec::new(),
            };
            match client.complete(&messages) {
                Err(e) => LabelRecord {
                    reason: Some(e.to_string()),
                    ..base
                },
                Ok(reply) => match parse_label_response(&reply) {
                    LabelOutcome::Labeled { label, warnings } => LabelRecord {
                        status: LabelStatus::Labeled,
                        label: Some(label),
                        warnings: warnings.iter().map(warning_text).collect(),
                        ..base
                    },
                    LabelOutcome::Discarded(reason) => LabelRecord {
                        status: LabelStatus::Discarded,
                        reason: Some(reason.to_string()),
                        ..base
                    },
                },
            }
        })
        .collect();

    let mut report = StageReport::new("label", started);
    report.inputs = records.len();
    for l in &labels {
        match l.status {
            LabelStatus::Labeled => report.outputs += 1,
            LabelStatus::Discarded => report.skip("unparseable_reply"),
            LabelStatus::Failed => report.skip("service_error"),
        }
    }
    report.written = labels.len();
    (labels, report)
}

// ---------------------------------------------------------------------------------------------
// mine

/// Builds the collection. Inputs are labeled commentaries; those naming an unknown video skip.
pub fn mine(corpus: &Corpus) -> (Vec<CollectionEntry>, StageReport) {
    let started = Instant::now();
    let entries = build_collection(&corpus.demos);
    let mut report = StageReport::new("mine", started);
    report.inputs = corpus.attached + corpus.unattached.len();
    report.outputs = corpus.attached;
    for _ in &corpus.unattached {
        report.skip("unknown_demo");
    }
    report.written = entries.len();
    (entries, report)
}

// ---------------------------------------------------------------------------------------------
// align

/// Aligns the collection in parallel, then applies top-k, split and review rejections.
pub fn align(
    demos: &[Demonstration],
    entries: &[CollectionEntry],
    config: &PipelineConfig,
    rejected: &BTreeSet<String>,
) -> (DatasetBuild, StageReport) {
    let started = Instant::now();
    let dataset = config.dataset();
    let index = index_demos(demos);
    let alignments = entries.par_iter().map(|e| align_entry(&index, e, &dataset)).collect();
    let build = assemble_dataset(&index, entries, alignments, &dataset, rejected);

    let mut report = StageReport::new("align", started);
    report.inputs = build.collection_size;
    report.outputs = build.tuples.len();
    for s in &build.skips {
        report.skip(s.reason.as_str());
    }
    report.written = build.tuples.len();
    (build, report)
}

pub fn tuple_records(tuples: &[CoachingTuple], config_hash: &str) -> Vec<TupleRecord> {
    tuples
        .iter()
        .map(|t| TupleRecord {
            tuple: t.clone(),
            config_hash: config_hash.into(),
        })
        .collect()
}

pub fn review_items(tuples: &[CoachingTuple]) -> Vec<ReviewItem> {
    tuples
        .iter()
        .filter(|t| t.split == Split::Test)
        .map(ReviewItem::new)
        .collect()
}

// ---------------------------------------------------------------------------------------------
// codebook

/// Trains a codebook on every frame of every demonstration, in manifest order.
pub fn train_corpus_codebook(demos: &[Demonstration], size: usize, seed: u64) -> Result<Codebook> {
    let frames: Vec<PoseFrame> = demos.iter().flat_map(|d| d.pose.frames().iter().cloned()).collect();
    Ok(train_codebook(&frames, size, seed)?)
}

// ---------------------------------------------------------------------------------------------
// retrieve

/// One query per learner instance among the selected tuples. The query is the learner window;
/// the ground truth is the expert of that instance's best-scoring tuple. Candidates are every
/// expert-pool demonstration of the learner's scenario, in manifest order.
pub fn retrieve_queries(
    demos: &[Demonstration],
    tuples: &[CoachingTuple],
    config: &PipelineConfig,
    codebook: Option<&Codebook>,
) -> Result<(Vec<RankRecord>, StageReport)> {
    let started = Instant::now();
    let selected: Vec<&CoachingTuple> = tuples
        .iter()
        .filter(|t| config.queries == QuerySet::All || t.split == Split::Test)
        .collect();
    let mut best: BTreeMap<(String, usize), &CoachingTuple> = BTreeMap::new();
    for t in &selected {
        let key = (t.learner_id.clone(), t.learner_commentary);
        match best.get(&key) {
            Some(b) if b.alignment_score_mm <= t.alignment_score_mm => {}
            _ => {
                best.insert(key, t);
            }
        }
    }

    let scorer = match config.scorer {
        ScorerKind::PoseAlignment => Scorer::PoseAlignment(SearchOptions {
            anchor_frame: None,
            stride: config.stride,
            mode: config.mode,
            scaling: config.scaling,
        }),
        ScorerKind::FeatureCosine => Scorer::FeatureCosine,
        ScorerKind::TokenOverlap => Scorer::TokenOverlap(
            codebook.ok_or_else(|| Error::Config("token_overlap scoring needs a codebook".into()))?,
        ),
    };
    let index = index_demos(demos);
    let outcomes: Vec<std::result::Result<RankRecord, &'static str>> = best
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|((learner_id, lc), t)| {
            let learner = index.get(learner_id.as_str()).ok_or("unknown_demo")?;
            let w = t.learner_window;
            let query = Demonstration {
                demo_id: format!("{learner_id}#{lc}"),
                pose: learner.pose.slice(w.start_frame, w.length_frames).map_err(|_| "window_out_of_bounds")?,
                commentaries: Vec::new(),
                ..(*learner).clone()
            };
            let candidates: Vec<Demonstration> = demos
                .iter()
                .filter(|d| d.skill.is_expert() && d.scenario == learner.scenario)
                .cloned()
                .collect();
            if candidates.is_empty() {
                return Err("no_candidates");
            }
            let result = retrieve(&query, &candidates, &scorer, Some(&t.expert_id)).map_err(|e| match e {
                coachmine_core::Error::MissingModality { .. } => "missing_modality",
                coachmine_core::Error::NoCandidateWindow(_) => "no_candidate_window",
                _ => "scoring_error",
            })?;
            Ok(RankRecord {
                scorer: coachmine_core::retrieval::CandidateScorer::name(&scorer).into(),
                ground_truth: Some(t.expert_id.clone()),
                result,
            })
        })
        .collect();

    let mut report = StageReport::new("retrieve", started);
    report.inputs = outcomes.len();
    let mut ranks = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => {
                report.outputs += 1;
                ranks.push(r);
            }
            Err(reason) => report.skip(reason),
        }
    }
    report.written = ranks.len();
    Ok((ranks, report))
}

// ---------------------------------------------------------------------------------------------
// evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query_id: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub scorers: Vec<String>,
    pub queries: usize,
    pub k: usize,
    pub recall_at_k: f64,
    pub median_rank: f64,
    pub per_query: Vec<QueryRank>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub id: String,
    pub bleu4: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSummary {
    pub tokenizer: String,
    pub smoothing: String,
    /// 1 for scores in [0, 1]; 100 for the percentage display.
    pub scale: f64,
    pub pairs: Vec<PairScore>,
    pub mean_bleu4: f64,
    pub mean_rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_hash: String,
    pub retrieval: Option<RetrievalSummary>,
    pub text: Option<TextSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub recall_k: usize,
    pub smoothing: BleuSmoothing,
    pub percent: bool,
}

/// Retrieval metrics over ranks with a ground truth; BLEU-4 and ROUGE-L (best reference) over
/// text pairs. Ranks without a ground truth and pairs with empty text are skipped.
pub fn evaluate(
    ranks: &[RankRecord],
    pairs: &[TextPair],
    options: EvalOptions,
    config_hash: &str,
) -> (MetricReport, StageReport) {
    let started = Instant::now();
    let mut report = StageReport::new("evaluate", started);
    report.inputs = ranks.len() + pairs.len();

    let mut usable = Vec::new();
    for r in ranks {
        if r.result.rank_of_ground_truth.is_some() {
            usable.push(r.result.clone());
            report.outputs += 1;
        } else {
            report.skip("no_ground_truth");
        }
    }
    let retrieval = (!usable.is_empty()).then(|| {
        let scorers: BTreeSet<String> = ranks.iter().map(|r| r.scorer.clone()).collect();
        RetrievalSummary {
            scorers: scorers.into_iter().collect(),
            queries: usable.len(),
            k: options.recall_k,
            recall_at_k: recall_at_k(&usable, options.recall_k).expect("non-empty, all ranked"),
            median_rank: median_rank(&usable).expect("non-empty, all ranked"),
            per_query: usable
                .iter()
                .map(|r| QueryRank {
                    query_id: r.query_id.clone(),
                    rank: r.rank_of_ground_truth.expect("filtered"),
                })
                .collect(),
        }
    });

    let scale = if options.percent { 100.0 } else { 1.0 };
    let mut scored = Vec::new();
    for p in pairs {
        let refs: Vec<&str> = p.references.iter().map(String::as_str).collect();
        let bleu = bleu4_with(&p.hypothesis, &refs, options.smoothing);
        let rouge = refs
            .iter()
            .map(|r| rouge_l_f1(&p.hypothesis, r))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max));
        match (bleu, rouge) {
            (Ok(b), Ok(r)) if r.is_finite() => {
                report.outputs += 1;
                scored.push(PairScore {
                    id: p.id.clone(),
                    bleu4: b * scale,
                    rouge_l: r * scale,
                });
            }
            _ => report.skip("empty_text"),
        }
    }
    let text = (!scored.is_empty()).then(|| {
        let n = scored.len() as f64;
        TextSummary {
            tokenizer: TOKENIZER.into(),
            smoothing: options.smoothing.name().into(),
            scale,
            mean_bleu4: scored.iter().map(|s| s.bleu4).sum::<f64>() / n,
            mean_rouge_l: scored.iter().map(|s| s.rouge_l).sum::<f64>() / n,
            pairs: scored,
        }
    });
    report.written = 1;
    (
        MetricReport {
            config_hash: config_hash.into(),
            retrieval,
            text,
        },
        report,
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    formats::write_text(path, &text)
}

// ---------------------------------------------------------------------------------------------
// run-all

/// Output file names inside the run directory.
pub mod files {
    pub const LABELS: &str = "labels.jsonl";
    pub const COLLECTION: &str = "collection.jsonl";
    pub const DATASET: &str = "dataset.jsonl";
    pub const SKIPS: &str = "skips.jsonl";
    pub const REVIEW: &str = "review.jsonl";
    pub const CODEBOOK: &str = "codebook.txt";
    pub const RANKS: &str = "ranks.jsonl";
    pub const REPORT: &str = "report.json";
    pub const MANIFEST: &str = "manifest.json";
}

/// Runs every stage with one config and writes all artifacts under `out_dir`.
pub fn run_all(
    config: &PipelineConfig,
    client: &(impl LabelingClient + Sync),
    out_dir: &Path,
    rejected: &BTreeSet<String>,
) -> Result<RunManifest> {
    let hash = config.hash();
    let out = |name: &str| -> PathBuf { out_dir.join(name) };
    let mut stages = Vec::new();
    let mut written = BTreeMap::new();
    let mut note = |key: &str, name: &str| {
        written.insert(key.to_string(), name.to_string());
    };

    let records = read_commentary(&config.paths.commentary)?;
    let (labels, report) = label(&records, client, &config.llm.system_prompt);
    jsonl::write(&out(files::LABELS), &labels)?;
    note("labels", files::LABELS);
    stages.push(report);

    let corpus = load_corpus(&config.paths.demos, &labels, config.fps)?;
    let (entries, report) = mine(&corpus);
    jsonl::write(&out(files::COLLECTION), &entries)?;
    note("collection", files::COLLECTION);
    stages.push(report);

    let (build, report) = align(&corpus.demos, &entries, config, rejected);
    jsonl::write(&out(files::DATASET), &tuple_records(&build.tuples, &hash))?;
    jsonl::write(&out(files::SKIPS), &build.skips)?;
    jsonl::write(&out(files::REVIEW), &review_items(&build.tuples))?;
    note("dataset", files::DATASET);
    note("skips", files::SKIPS);
    note("review", files::REVIEW);
    stages.push(report);

    let codebook = if config.scorer == ScorerKind::TokenOverlap {
        let cb = train_corpus_codebook(&corpus.demos, config.codebook_size, config.seed)?;
        formats::codebook::write(&out(files::CODEBOOK), &cb)?;
        note("codebook", files::CODEBOOK);
        Some(cb)
    } else {
        None
    };

    let (ranks, report) = retrieve_queries(&corpus.demos, &build.tuples, config, codebook.as_ref())?;
    jsonl::write(&out(files::RANKS), &ranks)?;
    note("ranks", files::RANKS);
    stages.push(report);

    let options = EvalOptions {
        recall_k: config.recall_k,
        smoothing: BleuSmoothing::AddEpsilon,
        percent: false,
    };
    let (metrics, report) = evaluate(&ranks, &[], options, &hash);
    write_json(&out(files::REPORT), &metrics)?;
    note("report", files::REPORT);
    stages.push(report);

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        config_hash: hash,
        stages,
        files: written,
    };
    write_json(&out(files::MANIFEST), &manifest)?;
    Ok(manifest)
}
