//! BLEU-4 and ROUGE-L over a shared tokenizer.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Name of the tokenization scheme, for report metadata.
pub const TOKENIZER: &str = "lowercase-alphanumeric-runs";

/// Value substituted for zero n-gram matches in smoothed BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Lowercases and splits on every non-alphanumeric character, dropping empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BleuSmoothing {
    /// Zero match counts are replaced by [`BLEU_EPSILON`].
    #[default]
    AddEpsilon,
    /// Any zero precision makes the score 0.
    None,
}

impl BleuSmoothing {
    pub fn name(self) -> &'static str {
        match self {
            BleuSmoothing::AddEpsilon => "add-epsilon-1e-9",
            BleuSmoothing::None => "none",
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU-4 of `hypothesis` against `references` with add-epsilon smoothing.
pub fn bleu4(hypothesis: &str, references: &[&str]) -> Result<f64> {
    bleu4_with(hypothesis, references, BleuSmoothing::AddEpsilon)
}

pub fn bleu4_with(hypothesis: &str, references: &[&str], smoothing: BleuSmoothing) -> Result<f64> {
    let hyp = tokenize(hypothesis);
    if hyp.is_empty() {
        return Err(Error::EmptyHypothesis);
    }
    if references.is_empty() {
        return Err(Error::InvalidArgument("at least one reference is required".into()));
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();

    // Orders longer than the hypothesis have no n-grams to score and are left out of the mean,
    // so a short hypothesis identical to a reference still scores 1.
    let orders = hyp.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let hyp_counts = ngram_counts(&hyp, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let total: usize = hyp_counts.values().sum();
        let clipped: usize = hyp_counts
            .iter()
            .map(|(gram, &count)| {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                count.min(max_ref)
            })
            .sum();
        let precision = match (clipped, smoothing) {
            (0, BleuSmoothing::None) => return Ok(0.0),
            (0, BleuSmoothing::AddEpsilon) => BLEU_EPSILON / total as f64,
            _ => clipped as f64 / total as f64,
        };
        log_sum += libm::log(precision);
    }

    let c = hyp.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap();
    let brevity = if c < r {
        libm::exp(1.0 - r as f64 / c as f64)
    } else {
        1.0
    };
    Ok(brevity * libm::exp(log_sum / orders as f64))
}

/// Length of the longest common subsequence of two token lists.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = alloc::vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F1 between a hypothesis and a single reference.
pub fn rouge_l_f1(hypothesis: &str, reference: &str) -> Result<f64> {
    let hyp = tokenize(hypothesis);
    let reference = tokenize(reference);
    if hyp.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput);
    }
    let lcs = lcs_len(&hyp, &reference);
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    Ok(2.0 * p * r / (p + r))
}
