//! Expert commentary labeling: the classification prompt, the parser for its
//! structured answer, and an offline keyword labeler.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Coarse body regions feedback is localized to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyRegion {
    Head,
    Shoulder,
    Hands,
    Arms,
    Legs,
    Jump,
}

impl BodyRegion {
    pub const ALL: [BodyRegion; 6] = [
        BodyRegion::Head,
        BodyRegion::Shoulder,
        BodyRegion::Hands,
        BodyRegion::Arms,
        BodyRegion::Legs,
        BodyRegion::Jump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BodyRegion::Head => "Head",
            BodyRegion::Shoulder => "Shoulder",
            BodyRegion::Hands => "Hands",
            BodyRegion::Arms => "Arms",
            BodyRegion::Legs => "Legs",
            BodyRegion::Jump => "Jump",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BodyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BodyRegion {
    type Err = Error;

    /// Case-insensitive; also accepts the singular/plural variant of each name.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let region = match lower.as_str() {
            "head" => BodyRegion::Head,
            "shoulder" | "shoulders" => BodyRegion::Shoulder,
            "hands" | "hand" => BodyRegion::Hands,
            "arms" | "arm" => BodyRegion::Arms,
            "legs" | "leg" => BodyRegion::Legs,
            "jump" => BodyRegion::Jump,
            _ => return Err(Error::InvalidArgument(format!("unknown body region {s:?}"))),
        };
        Ok(region)
    }
}

/// Per-region verdict. Codes: 0 needs improvement, 1 correct, 2 no mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum RegionLabel {
    NeedsImprovement = 0,
    Correct = 1,
    #[default]
    NoMention = 2,
}

impl RegionLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RegionLabel::NeedsImprovement),
            1 => Some(RegionLabel::Correct),
            2 => Some(RegionLabel::NoMention),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionLabel::NeedsImprovement => "NeedsImprovement",
            RegionLabel::Correct => "Correct",
            RegionLabel::NoMention => "NoMention",
        }
    }
}

impl FromStr for RegionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NeedsImprovement" => Ok(RegionLabel::NeedsImprovement),
            "Correct" => Ok(RegionLabel::Correct),
            "NoMention" => Ok(RegionLabel::NoMention),
            _ => Err(Error::InvalidArgument(format!("unknown region label {s:?}"))),
        }
    }
}

#[cfg(feature = "serde")]
mod serde_impls {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for BodyRegion {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            s.serialize_str(self.name())
        }
    }

    impl<'de> Deserialize<'de> for BodyRegion {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let s = String::deserialize(d)?;
            s.parse().map_err(D::Error::custom)
        }
    }

    impl Serialize for RegionLabel {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            s.serialize_str(self.name())
        }
    }

    impl<'de> Deserialize<'de> for RegionLabel {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let s = String::deserialize(d)?;
            s.parse().map_err(D::Error::custom)
        }
    }
}

/// A time-stamped piece of expert commentary on one video.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommentaryRecord {
    pub text: String,
    pub timestamp_s: f64,
    pub video_id: String,
    pub expert_id: String,
    pub scenario: String,
}

impl CommentaryRecord {
    pub fn new(
        text: impl Into<String>,
        timestamp_s: f64,
        video_id: impl Into<String>,
        expert_id: impl Into<String>,
        scenario: impl Into<String>,
    ) -> Result<Self> {
        let record = Self {
            text: text.into(),
            timestamp_s,
            video_id: video_id.into(),
            expert_id: expert_id.into(),
            scenario: scenario.into(),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidArgument("commentary text is empty".into()));
        }
        if !(self.timestamp_s.is_finite() && self.timestamp_s >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "timestamp must be non-negative, got {}",
                self.timestamp_s
            )));
        }
        if self.scenario.trim().is_empty() {
            return Err(Error::InvalidArgument("scenario is empty".into()));
        }
        Ok(())
    }
}

/// One-sentence summary plus a verdict for every body region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentaryLabel {
    summary: String,
    labels: [RegionLabel; 6],
}

impl CommentaryLabel {
    pub fn new(summary: impl Into<String>) -> Result<Self> {
        let summary = summary.into();
        if summary.trim().is_empty() {
            return Err(Error::InvalidArgument("summary is empty".into()));
        }
        Ok(Self {
            summary,
            labels: [RegionLabel::NoMention; 6],
        })
    }

    pub fn with(mut self, region: BodyRegion, label: RegionLabel) -> Self {
        self.set(region, label);
        self
    }

    pub fn set(&mut self, region: BodyRegion, label: RegionLabel) {
        self.labels[region.index()] = label;
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn label(&self, region: BodyRegion) -> RegionLabel {
        self.labels[region.index()]
    }

    pub fn regions_with(&self, label: RegionLabel) -> impl Iterator<Item = BodyRegion> + '_ {
        BodyRegion::ALL.into_iter().filter(move |r| self.label(*r) == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BodyRegion, RegionLabel)> + '_ {
        BodyRegion::ALL.into_iter().map(|r| (r, self.label(r)))
    }

    pub fn has_incorrect(&self) -> bool {
        self.labels.contains(&RegionLabel::NeedsImprovement)
    }

    pub fn has_correct(&self) -> bool {
        self.labels.contains(&RegionLabel::Correct)
    }
}

#[cfg(feature = "serde")]
mod label_serde {
    use super::*;
    use alloc::collections::BTreeMap;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        summary: String,
        labels: BTreeMap<BodyRegion, RegionLabel>,
    }

    impl Serialize for CommentaryLabel {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            Repr {
                summary: self.summary.clone(),
                labels: self.iter().collect(),
            }
            .serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for CommentaryLabel {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let repr = Repr::deserialize(d)?;
            let mut label = CommentaryLabel::new(repr.summary).map_err(D::Error::custom)?;
            for region in BodyRegion::ALL {
                let value = repr
                    .labels
                    .get(&region)
                    .ok_or_else(|| D::Error::custom(format!("missing label for {region}")))?;
                label.set(region, *value);
            }
            Ok(label)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// System message sent ahead of the few-shot exemplars.
pub const DEFAULT_SYSTEM_PROMPT: &str = "You are a helpful assistant.";

const INSTRUCTION_PREFIX: &str = "The following is an expert commentary about a person playing ";
const INSTRUCTION_SUFFIX: &str = ". Give a one sentence summary of the expert feedback and then mention which body parts out of Head, Shoulder, Hands, Arms, Legs, Jump needs improvement and which ones are good execution (you can choose multiple body parts). Here is the expert's commentary:\n\n";

const INCORRECT_EXEMPLAR: &str = "He came down on one foot that time. You want to make sure you come down on two feet. Right now he's putting a little bit too much pressure and stress. Then on top of that, his left knee is locked, which could easily cause some hypertension. So be very aware and careful of your landing.";
const INCORRECT_EXEMPLAR_ANSWER: &str = "One sentence summary: He came down on one foot and his left knee is locked, which could cause some hypertension. \\n Needs improvement parts: Legs, Jump. \\n Good execution parts: None.";
const CORRECT_EXEMPLAR: &str = "Let's take a look at the placement of the shooter's left guy hand. You can see that it's in a really good position on the left side of the ball. If you take a look at the shooting hand, his right hand is underneath the ball with his right index finger in the middle section of the ball. His right index finger is in the middle section of the ball. This is good positioning of both his right shooting hand and his left guy hand on the ball.";
const CORRECT_EXEMPLAR_ANSWER: &str = "One sentence summary: Shooter's hand is in a really good position on the left side of the ball. \\n Needs improvement parts: None. \\n Good execution parts: Hands.";

const SUMMARY_HEADER: &str = "one sentence summary:";
const NEEDS_HEADER: &str = "needs improvement parts:";
const GOOD_HEADER: &str = "good execution parts:";

/// Title-cases each whitespace-separated word: `rock climbing` → `Rock Climbing`.
pub fn scenario_display_name(scenario: &str) -> String {
    let mut out = String::with_capacity(scenario.len());
    for (i, word) in scenario.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.push_str(chars.as_str());
        }
    }
    out
}

/// Few-shot classification prompt for one commentary record.
pub fn build_prompt(record: &CommentaryRecord) -> Vec<ChatMessage> {
    build_prompt_with_system(record, DEFAULT_SYSTEM_PROMPT)
}

pub fn build_prompt_with_system(record: &CommentaryRecord, system: &str) -> Vec<ChatMessage> {
    let instruction = format!(
        "{INSTRUCTION_PREFIX}{}{INSTRUCTION_SUFFIX}{INCORRECT_EXEMPLAR}",
        scenario_display_name(&record.scenario)
    );
    alloc::vec![
        ChatMessage::new(Role::System, system),
        ChatMessage::new(Role::User, instruction),
        ChatMessage::new(Role::Assistant, INCORRECT_EXEMPLAR_ANSWER),
        ChatMessage::new(Role::User, CORRECT_EXEMPLAR),
        ChatMessage::new(Role::Assistant, CORRECT_EXEMPLAR_ANSWER),
        ChatMessage::new(Role::User, record.text.clone()),
    ]
}

/// Why a response could not be turned into a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscardReason {
    MissingHeader(&'static str),
    EmptySummary,
    UnknownRegion(String),
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscardReason::MissingHeader(h) => write!(f, "missing header {h:?}"),
            DiscardReason::EmptySummary => f.write_str("empty summary"),
            DiscardReason::UnknownRegion(r) => write!(f, "unknown body region {r:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// The summary had text after its first sentence; only the first sentence was kept.
    MultiSentenceSummary { dropped: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelOutcome {
    Labeled {
        label: CommentaryLabel,
        warnings: Vec<ParseWarning>,
    },
    Discarded(DiscardReason),
}

impl LabelOutcome {
    pub fn label(&self) -> Option<&CommentaryLabel> {
        match self {
            LabelOutcome::Labeled { label, .. } => Some(label),
            LabelOutcome::Discarded(_) => None,
        }
    }

    pub fn is_discarded(&self) -> bool {
        matches!(self, LabelOutcome::Discarded(_))
    }
}

/// Parses `One sentence summary: … Needs improvement parts: … Good execution parts: …`.
///
/// Headers match case-insensitively in any order. Both real newlines and the literal two-character
/// `\n` separate fields. A region listed under both headers is labeled NeedsImprovement.
pub fn parse_label_response(response: &str) -> LabelOutcome {
    let text = response.replace("\\n", "\n");
    let lower = text.to_ascii_lowercase();

    let mut headers = Vec::with_capacity(3);
    for header in [SUMMARY_HEADER, NEEDS_HEADER, GOOD_HEADER] {
        match lower.find(header) {
            Some(at) => headers.push((at, header)),
            None => return LabelOutcome::Discarded(DiscardReason::MissingHeader(header)),
        }
    }
    headers.sort();
    let section = |header: &str| -> &str {
        let i = headers.iter().position(|(_, h)| *h == header).unwrap();
        let start = headers[i].0 + header.len();
        let end = headers.get(i + 1).map_or(text.len(), |(at, _)| *at);
        &text[start..end]
    };

    let (summary, warnings) = match first_sentence(section(SUMMARY_HEADER)) {
        Some(parts) => parts,
        None => return LabelOutcome::Discarded(DiscardReason::EmptySummary),
    };
    let needs = match parse_region_list(section(NEEDS_HEADER)) {
        Ok(r) => r,
        Err(reason) => return LabelOutcome::Discarded(reason),
    };
    let good = match parse_region_list(section(GOOD_HEADER)) {
        Ok(r) => r,
        Err(reason) => return LabelOutcome::Discarded(reason),
    };

    let mut label = CommentaryLabel {
        summary,
        labels: [RegionLabel::NoMention; 6],
    };
    for region in good {
        label.set(region, RegionLabel::Correct);
    }
    for region in needs {
        label.set(region, RegionLabel::NeedsImprovement);
    }
    LabelOutcome::Labeled { label, warnings }
}

fn first_sentence(raw: &str) -> Option<(String, Vec<ParseWarning>)> {
    let trimmed = raw.trim_matches(|c: char| c.is_whitespace() || c == '*');
    if trimmed.is_empty() {
        return None;
    }
    let bytes = trimmed.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()) {
            let (head, rest) = trimmed.split_at(i + 1);
            let rest = rest.trim();
            let warnings = if rest.is_empty() {
                Vec::new()
            } else {
                alloc::vec![ParseWarning::MultiSentenceSummary {
                    dropped: rest.to_owned()
                }]
            };
            return Some((head.to_owned(), warnings));
        }
    }
    Some((trimmed.to_owned(), Vec::new()))
}

fn parse_region_list(raw: &str) -> core::result::Result<Vec<BodyRegion>, DiscardReason> {
    let line = raw.trim_start().split('\n').next().unwrap_or("");
    let is_punct = |c: char| c.is_whitespace() || matches!(c, '.' | ',' | ';' | ':' | '!' | '*' | '"' | '\'' | '`' | '(' | ')');
    let line = line.trim_matches(is_punct);
    if line.is_empty() || line.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut regions = Vec::new();
    for item in line
        .split([',', ';', '/', '&'])
        .flat_map(|part| part.split(" and "))
    {
        let item = item.trim_matches(is_punct);
        let item = item.strip_prefix("and ").unwrap_or(item).trim();
        if item.is_empty() {
            continue;
        }
        if item.eq_ignore_ascii_case("none") {
            continue;
        }
        match item.parse::<BodyRegion>() {
            Ok(region) => regions.push(region),
            Err(_) => return Err(DiscardReason::UnknownRegion(item.to_string())),
        }
    }
    Ok(regions)
}

fn format_region_list(label: &CommentaryLabel, which: RegionLabel) -> String {
    let names: Vec<&str> = label.regions_with(which).map(BodyRegion::name).collect();
    if names.is_empty() {
        "None".into()
    } else {
        names.join(", ")
    }
}

/// Renders a label in the answer grammar (the inverse of [`parse_label_response`]).
pub fn serialize_label(label: &CommentaryLabel) -> String {
    format!(
        "One sentence summary: {} \\n Needs improvement parts: {}. \\n Good execution parts: {}.",
        label.summary(),
        format_region_list(label, RegionLabel::NeedsImprovement),
        format_region_list(label, RegionLabel::Correct),
    )
}

/// A chat-completion backend that answers a message list with assistant text.
pub trait LabelingClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

impl<T: LabelingClient + ?Sized> LabelingClient for &T {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        (**self).complete(messages)
    }
}

/// Prompt → completion → parse. Transport failures are errors; unparseable answers are
/// [`LabelOutcome::Discarded`].
pub fn classify_commentary(
    record: &CommentaryRecord,
    client: &impl LabelingClient,
) -> Result<LabelOutcome> {
    record.validate()?;
    let messages = build_prompt(record);
    let response = client.complete(&messages)?;
    Ok(parse_label_response(&response))
}

/// Maps a keyword (matched as a word prefix) to a region, with an optional fixed verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeywordRule {
    pub keyword: String,
    pub region: BodyRegion,
    /// When absent, the verdict is Correct if the sentence contains a praise word.
    #[cfg_attr(feature = "serde", serde(default))]
    pub label: Option<RegionLabel>,
}

impl KeywordRule {
    pub fn new(keyword: &str, region: BodyRegion, label: Option<RegionLabel>) -> Self {
        Self {
            keyword: keyword.to_ascii_lowercase(),
            region,
            label,
        }
    }
}

const PRAISE_WORDS: [&str; 9] = [
    "good", "great", "nice", "well", "perfect", "excellent", "solid", "correct", "beautiful",
];

/// Deterministic offline labeler that answers in the same grammar a language model would.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubLabeler {
    rules: Vec<KeywordRule>,
}

/// Reply for commentary no rule recognizes; it does not parse, so the record is discarded.
pub const STUB_NO_MATCH_REPLY: &str = "This commentary does not contain actionable feedback.";

impl StubLabeler {
    pub fn new(rules: Vec<KeywordRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[KeywordRule] {
        &self.rules
    }

    /// Labels one commentary text directly.
    pub fn label_text(&self, text: &str) -> Option<CommentaryLabel> {
        let summary = first_sentence(text).map(|(mut s, _)| {
            if !s.ends_with(['.', '!', '?']) {
                s.push('.');
            }
            s
        })?;
        let mut label = CommentaryLabel::new(summary).ok()?;
        let mut fired = false;
        for sentence in text.split(['.', '!', '?']) {
            let words: Vec<String> = sentence
                .split(|c: char| !c.is_alphanumeric() && c != '\'')
                .filter(|w| !w.is_empty())
                .map(|w| w.to_lowercase())
                .collect();
            let praised = words.iter().any(|w| PRAISE_WORDS.contains(&w.as_str()));
            for rule in &self.rules {
                if !words.iter().any(|w| w.starts_with(rule.keyword.as_str())) {
                    continue;
                }
                fired = true;
                let verdict = rule.label.unwrap_or(if praised {
                    RegionLabel::Correct
                } else {
                    RegionLabel::NeedsImprovement
                });
                let current = label.label(rule.region);
                if current != RegionLabel::NeedsImprovement {
                    label.set(rule.region, verdict);
                }
            }
        }
        fired.then_some(label)
    }
}

impl Default for StubLabeler {
    fn default() -> Self {
        use BodyRegion::*;
        let table: [(&str, BodyRegion); 22] = [
            ("head", Head),
            ("chin", Head),
            ("eyes", Head),
            ("gaze", Head),
            ("neck", Head),
            ("shoulder", Shoulder),
            ("hand", Hands),
            ("finger", Hands),
            ("wrist", Hands),
            ("grip", Hands),
            ("palm", Hands),
            ("arm", Arms),
            ("elbow", Arms),
            ("leg", Legs),
            ("knee", Legs),
            ("foot", Legs),
            ("feet", Legs),
            ("ankle", Legs),
            ("stance", Legs),
            ("jump", Jump),
            ("landing", Jump),
            ("leap", Jump),
        ];
        Self::new(
            table
                .iter()
                .map(|(k, r)| KeywordRule::new(k, *r, None))
                .collect(),
        )
    }
}

impl LabelingClient for StubLabeler {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let query = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| Error::Service("prompt has no user message".into()))?;
        Ok(match self.label_text(&query.content) {
            Some(label) => serialize_label(&label),
            None => STUB_NO_MATCH_REPLY.into(),
        })
    }
}
