use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coachmine::config::{ConfigReport, PipelineConfig};
use coachmine::error::{Error, Result};
use coachmine::formats::{codebook, jsonl, pose};
use coachmine::llm::{Fixtures, HttpLabeler};
use coachmine::pipeline::{self, EvalOptions, StageReport};
use coachmine::records::{load_corpus, read_reject_list, FrameParams, LabelRecord, TextPair, TokenRecord, TupleRecord};
use coachmine::synthetic;
use coachmine_core::codec::{decode_per_frame, encode, normalize_frame, TokenSequence};
use coachmine_core::commentary::StubLabeler;
use coachmine_core::pairing::CollectionEntry;
use coachmine_core::text::BleuSmoothing;

/// Mine coaching triples from pose-annotated skill videos and evaluate coaching outputs.
#[derive(Parser)]
#[command(name = "coachmine", version)]
struct Cli {
    /// TOML config file. Relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set k_train=3` or `--set llm.model=gpt-4o`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved config, its hash and the fixed taxonomies.
    Config,
    /// Label commentary with the language model (or the offline stub).
    Label {
        #[arg(long)]
        commentary: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        labeler: LabelerArgs,
    },
    /// Build the candidate collection from demonstrations and labels.
    Mine {
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align the collection and write the dataset, skips and the review list.
    Align {
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        collection: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `skips.jsonl` next to the dataset.
        #[arg(long)]
        skips: Option<PathBuf>,
        /// Defaults to `review.jsonl` next to the dataset.
        #[arg(long)]
        review: Option<PathBuf>,
        /// Tuple keys rejected in review, one per line.
        #[arg(long)]
        reject: Option<PathBuf>,
    },
    /// Pose codebook training and tokenization.
    #[command(subcommand)]
    Codebook(CodebookCommand),
    /// Rank expert demonstrations for each dataset query.
    Retrieve {
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Required for the token_overlap scorer.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Compute recall@k / median rank from ranks and BLEU-4 / ROUGE-L from text pairs.
    Evaluate {
        #[arg(long)]
        ranks: Option<PathBuf>,
        /// Records of `{id, hypothesis, references}`.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Report text scores ×100.
        #[arg(long)]
        percent: bool,
        /// Unsmoothed BLEU (any zero n-gram precision gives 0).
        #[arg(long)]
        no_smoothing: bool,
    },
    /// Run every stage with one config.
    RunAll {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        reject: Option<PathBuf>,
        #[command(flatten)]
        labeler: LabelerArgs,
    },
    /// Write the planted-pair synthetic corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum CodebookCommand {
    /// Train on every frame of the manifest's demonstrations.
    Train {
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode pose files into token records.
    Encode {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long = "pose", required = true)]
        poses: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode token records into `<source_id>.pose` files.
    Decode {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct LabelerArgs {
    /// Use the offline keyword labeler instead of the HTTP endpoint.
    #[arg(long)]
    stub: bool,
    /// Save every LLM exchange under this directory.
    #[arg(long, conflicts_with_all = ["replay", "stub"])]
    record: Option<PathBuf>,
    /// Answer from exchanges saved by --record; no network access.
    #[arg(long, conflicts_with = "stub")]
    replay: Option<PathBuf>,
}

impl LabelerArgs {
    fn fixtures(&self) -> Fixtures {
        match (&self.record, &self.replay) {
            (Some(d), _) => Fixtures::Record(d.clone()),
            (_, Some(d)) => Fixtures::Replay(d.clone()),
            _ => Fixtures::Off,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("error record serializes"));
            ExitCode::FAILURE
        }
    }
}

fn print_report(report: &StageReport) {
    println!("{}", serde_json::to_string(report).expect("report serializes"));
}

fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    jsonl::read(path)
}

fn run(cli: Cli) -> Result<()> {
    let config = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let demos_path = |p: Option<PathBuf>| p.unwrap_or_else(|| config.paths.demos.clone());

    match cli.command {
        Command::Config => {
            let text = toml::to_string(&ConfigReport::new(&config)).map_err(|e| Error::Config(e.to_string()))?;
            print!("{text}");
        }
        Command::Label {
            commentary,
            out,
            labeler,
        } => {
            let records = pipeline::read_commentary(&commentary.unwrap_or_else(|| config.paths.commentary.clone()))?;
            let (labels, report) = if labeler.stub {
                pipeline::label(&records, &StubLabeler::default(), &config.llm.system_prompt)
            } else {
                let client = HttpLabeler::from_config(&config, labeler.fixtures())?;
                pipeline::label(&records, &client, &config.llm.system_prompt)
            };
            jsonl::write(&out, &labels)?;
            print_report(&report);
        }
        Command::Mine { demos, labels, out } => {
            let corpus = load_corpus(&demos_path(demos), &read_labels(&labels)?, config.fps)?;
            let (entries, report) = pipeline::mine(&corpus);
            jsonl::write(&out, &entries)?;
            print_report(&report);
        }
        Command::Align {
            demos,
            labels,
            collection,
            out,
            skips,
            review,
            reject,
        } => {
            let corpus = load_corpus(&demos_path(demos), &read_labels(&labels)?, config.fps)?;
            let entries: Vec<CollectionEntry> = jsonl::read(&collection)?;
            let rejected = reject.map(|p| read_reject_list(&p)).transpose()?.unwrap_or_default();
            let (build, report) = pipeline::align(&corpus.demos, &entries, &config, &rejected);
            let sibling = |name: &str| out.with_file_name(name);
            jsonl::write(&out, &pipeline::tuple_records(&build.tuples, &config.hash()))?;
            jsonl::write(&skips.unwrap_or_else(|| sibling(pipeline::files::SKIPS)), &build.skips)?;
            jsonl::write(
                &review.unwrap_or_else(|| sibling(pipeline::files::REVIEW)),
                &pipeline::review_items(&build.tuples),
            )?;
            print_report(&report);
        }
        Command::Codebook(CodebookCommand::Train { demos, out }) => {
            let corpus = load_corpus(&demos_path(demos), &[], config.fps)?;
            let cb = pipeline::train_corpus_codebook(&corpus.demos, config.codebook_size, config.seed)?;
            codebook::write(&out, &cb)?;
            println!("{}", cb.version());
        }
        Command::Codebook(CodebookCommand::Encode {
            codebook: cb_path,
            poses,
            out,
        }) => {
            let cb = codebook::read(&cb_path)?;
            let records = poses
                .iter()
                .map(|p| {
                    let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    let seq = pose::read(p, &id)?;
                    let tokens = encode(&seq, &cb)?;
                    let frame_params = seq
                        .frames()
                        .iter()
                        .map(|f| normalize_frame(f).map(|n| FrameParams { scale: n.scale, root: n.root }))
                        .collect::<coachmine_core::Result<Vec<_>>>()?;
                    Ok(TokenRecord {
                        source_id: tokens.source_id,
                        fps: tokens.fps,
                        codebook_version: tokens.codebook_version,
                        tokens: tokens.tokens,
                        frame_params,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            jsonl::write(&out, &records)?;
        }
        Command::Codebook(CodebookCommand::Decode {
            codebook: cb_path,
            tokens,
            out_dir,
        }) => {
            let cb = codebook::read(&cb_path)?;
            let records: Vec<TokenRecord> = jsonl::read(&tokens)?;
            for r in records {
                let params: Vec<(f64, [f64; 3])> = if r.frame_params.is_empty() {
                    vec![(1.0, [0.0; 3]); r.tokens.len()]
                } else {
                    r.frame_params.iter().map(|p| (p.scale, p.root)).collect()
                };
                let seq = TokenSequence {
                    tokens: r.tokens,
                    fps: r.fps,
                    source_id: r.source_id.clone(),
                    codebook_version: r.codebook_version,
                };
                let decoded = decode_per_frame(&seq, &cb, &params)?;
                pose::write(&out_dir.join(format!("{}.pose", r.source_id)), &decoded)?;
            }
        }
        Command::Retrieve {
            demos,
            dataset,
            out,
            codebook: cb_path,
        } => {
            let corpus = load_corpus(&demos_path(demos), &[], config.fps)?;
            let tuples: Vec<TupleRecord> = jsonl::read(&dataset)?;
            let tuples: Vec<_> = tuples.into_iter().map(|t| t.tuple).collect();
            let cb = cb_path.map(|p| codebook::read(&p)).transpose()?;
            let (ranks, report) = pipeline::retrieve_queries(&corpus.demos, &tuples, &config, cb.as_ref())?;
            jsonl::write(&out, &ranks)?;
            print_report(&report);
        }
        Command::Evaluate {
            ranks,
            pairs,
            out,
            percent,
            no_smoothing,
        } => {
            let ranks = ranks.map(|p| jsonl::read(&p)).transpose()?.unwrap_or_default();
            let pairs: Vec<TextPair> = pairs.map(|p| jsonl::read(&p)).transpose()?.unwrap_or_default();
            let options = EvalOptions {
                recall_k: config.recall_k,
                smoothing: if no_smoothing { BleuSmoothing::None } else { BleuSmoothing::AddEpsilon },
                percent,
            };
            let (metrics, report) = pipeline::evaluate(&ranks, &pairs, options, &config.hash());
            pipeline::write_json(&out, &metrics)?;
            print_report(&report);
        }
        Command::RunAll {
            out_dir,
            reject,
            labeler,
        } => {
            let out_dir = out_dir.unwrap_or_else(|| config.paths.output_dir.clone());
            let rejected: BTreeSet<String> = reject.map(|p| read_reject_list(&p)).transpose()?.unwrap_or_default();
            let manifest = if labeler.stub {
                pipeline::run_all(&config, &StubLabeler::default(), &out_dir, &rejected)?
            } else {
                let client = HttpLabeler::from_config(&config, labeler.fixtures())?;
                pipeline::run_all(&config, &client, &out_dir, &rejected)?
            };
            for stage in &manifest.stages {
                print_report(stage);
            }
        }
        Command::Synth { out_dir, seed } => synthetic::write_planted_corpus(&out_dir, seed)?,
    }
    Ok(())
}
