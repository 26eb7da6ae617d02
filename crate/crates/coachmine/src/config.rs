//! Pipeline configuration: a TOML file, `key=value` overrides, and a content hash.

use std::path::{Path, PathBuf};

use coachmine_core::commentary::{BodyRegion, DEFAULT_SYSTEM_PROMPT};
use coachmine_core::defaults;
use coachmine_core::pairing::{DatasetConfig, SkillLevel};
use coachmine_core::pose::{AlignMode, Scaling};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ENV_ENDPOINT: &str = "COACHMINE_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "COACHMINE_LLM_MODEL";
pub const ENV_API_KEY: &str = "COACHMINE_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    PoseAlignment,
    FeatureCosine,
    TokenOverlap,
}

/// Which tuples become retrieval queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuerySet {
    #[default]
    Test,
    All,
}

/// Input and output locations. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub commentary: PathBuf,
    pub demos: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            commentary: "commentary.jsonl".into(),
            demos: "demos.jsonl".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Chat-completions URL; `COACHMINE_LLM_ENDPOINT` takes precedence.
    pub endpoint: Option<String>,
    /// `COACHMINE_LLM_MODEL` takes precedence.
    pub model: Option<String>,
    pub system_prompt: String,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_s: u64,
    pub temperature: f64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            system_prompt: DEFAULT_SYSTEM_PROMPT.into(),
            max_retries: defaults::LLM_MAX_RETRIES,
            backoff_ms: 500,
            timeout_s: 60,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_length_s: f64,
    pub fps: f64,
    pub stride: usize,
    pub mode: AlignMode,
    pub scaling: Scaling,
    /// Expert windows must strictly contain the expert commentary's frame.
    pub anchor_expert: bool,
    pub k_train: usize,
    pub k_test: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub codebook_size: usize,
    pub scorer: ScorerKind,
    pub queries: QuerySet,
    pub recall_k: usize,
    pub llm: LlmSettings,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_length_s: defaults::WINDOW_LENGTH_S,
            fps: defaults::FPS,
            stride: 1,
            mode: AlignMode::PerFrame,
            scaling: Scaling::Similarity,
            anchor_expert: true,
            k_train: defaults::K_TRAIN,
            k_test: defaults::K_TEST,
            test_fraction: defaults::TEST_FRACTION,
            seed: defaults::SEED,
            codebook_size: defaults::CODEBOOK_SIZE,
            scorer: ScorerKind::PoseAlignment,
            queries: QuerySet::Test,
            recall_k: defaults::RECALL_K,
            llm: LlmSettings::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates. Relative paths in the
    /// file are rebased onto its directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(base) = path.and_then(Path::parent) {
            config.paths.rebase(base);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.window_length_s.is_finite() && self.window_length_s > 0.0) {
            return bad("window_length_s must be positive");
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.k_train == 0 || self.k_test == 0 {
            return bad("k_train and k_test must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1]");
        }
        if self.codebook_size == 0 {
            return bad("codebook_size must be at least 1");
        }
        if self.recall_k == 0 {
            return bad("recall_k must be at least 1");
        }
        if !(self.llm.temperature.is_finite() && self.llm.temperature >= 0.0) {
            return bad("llm.temperature must be non-negative");
        }
        self.dataset().validate()?;
        Ok(())
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            window_length_s: self.window_length_s,
            k_train: self.k_train,
            k_test: self.k_test,
            test_fraction: self.test_fraction,
            seed: self.seed,
            stride: self.stride,
            mode: self.mode,
            scaling: self.scaling,
            anchor_expert: self.anchor_expert,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of every field except `paths`, over the canonical JSON form. Locations do not change
    /// what the pipeline computes; everything else does.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("struct").remove("paths");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn llm_endpoint(&self) -> Option<String> {
        std::env::var(ENV_ENDPOINT).ok().or_else(|| self.llm.endpoint.clone())
    }

    pub fn llm_model(&self) -> Option<String> {
        std::env::var(ENV_MODEL).ok().or_else(|| self.llm.model.clone())
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.commentary, &mut self.demos, &mut self.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Sets a dotted key (`llm.max_retries=5`). The value is read as a TOML literal, falling back to
/// a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for part in parents {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// The fixed taxonomies, for `config show` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct Taxonomy {
    pub body_regions: Vec<BodyRegion>,
    pub skill_levels: Vec<SkillLevel>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self {
            body_regions: BodyRegion::ALL.to_vec(),
            skill_levels: SkillLevel::ALL.to_vec(),
        }
    }
}

/// Resolved config plus taxonomy, as printed by `coachmine config`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ConfigReport {
    pub config_hash: String,
    pub taxonomy: Taxonomy,
    pub config: PipelineConfig,
}

impl ConfigReport {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            config_hash: config.hash(),
            taxonomy: Taxonomy::default(),
            config: config.clone(),
        }
    }
}
