//! IC+ST corpus records, BIO conversion and on-disk formats.
//!
//! The universal record is [`AnnotatedUtterance`]: whitespace tokens, one
//! intent label and a sorted list of non-overlapping [`SlotSpan`]s with
//! inclusive end indices.

mod bio;
mod formats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::SlotOperation;

pub use bio::{parse_bio, to_bio, BioMode, BioTag};
pub use formats::{read_dataset, read_dataset_str, write_dataset, write_dataset_string, DatasetFormat};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("illegal tag sequence at token {position}: {tag}")]
    IllegalTagSequence { position: usize, tag: String },
    #[error("malformed tag {0:?}")]
    MalformedTag(String),
    #[error("invalid utterance: {0}")]
    InvalidUtterance(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: unknown {kind} label {label:?}")]
    Schema {
        line: usize,
        kind: &'static str,
        label: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Format {
            line,
            message: message.into(),
        }
    }
}

/// A labeled token range, `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl SlotSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        SlotSpan {
            start,
            end,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedUtterance {
    pub tokens: Vec<String>,
    pub intent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub language: String,
    pub slots: Vec<SlotSpan>,
}

impl AnnotatedUtterance {
    /// Builds and validates a record.
    pub fn new(
        tokens: Vec<String>,
        intent: impl Into<String>,
        language: impl Into<String>,
        slots: Vec<SlotSpan>,
    ) -> Result<Self, CorpusError> {
        let u = AnnotatedUtterance {
            tokens,
            intent: intent.into(),
            domain: None,
            language: language.into(),
            slots,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    /// Checks token and span well-formedness.
    pub fn validate(&self) -> Result<(), CorpusError> {
        validate_tagging(&self.tokens, &self.slots)
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn span_text(&self, span: &SlotSpan) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    /// Primary language subtag, lowercased (`"de-DE"` -> `"de"`).
    pub fn primary_language(&self) -> String {
        primary_subtag(&self.language)
    }

    pub fn is_english(&self) -> bool {
        self.primary_language() == "en"
    }
}

pub(crate) fn primary_subtag(code: &str) -> String {
    code.split(['-', '_']).next().unwrap_or_default().to_ascii_lowercase()
}

pub(crate) fn validate_tagging(tokens: &[String], slots: &[SlotSpan]) -> Result<(), CorpusError> {
    for (i, tok) in tokens.iter().enumerate() {
        if tok.is_empty() {
            return Err(CorpusError::InvalidUtterance(format!("token {i} is empty")));
        }
        if tok.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidUtterance(format!(
                "token {i} contains whitespace: {tok:?}"
            )));
        }
    }
    let mut next_free = 0usize;
    for span in slots {
        if span.label.is_empty() {
            return Err(CorpusError::InvalidUtterance("empty slot label".into()));
        }
        if span.start > span.end {
            return Err(CorpusError::InvalidUtterance(format!(
                "span {}..={} is reversed",
                span.start, span.end
            )));
        }
        if span.end >= tokens.len() {
            return Err(CorpusError::InvalidUtterance(format!(
                "span {}..={} out of range for {} tokens",
                span.start,
                span.end,
                tokens.len()
            )));
        }
        if span.start < next_free {
            return Err(CorpusError::InvalidUtterance(format!(
                "span {}..={} overlaps or is out of order",
                span.start, span.end
            )));
        }
        next_free = span.end + 1;
    }
    Ok(())
}

/// Per-record annotations carried by parallel corpora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    /// Bracket index of each span in the source file, in span order.
    pub slot_indices: Vec<u32>,
    /// Human-chosen replacement method per span, in span order.
    pub slot_methods: Vec<Option<SlotOperation>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<AnnotatedUtterance>,
    pub provenance: String,
    /// Present for parallel corpora; same length as `records`.
    pub meta: Option<Vec<RecordMeta>>,
}

impl Dataset {
    pub fn new(records: Vec<AnnotatedUtterance>, provenance: impl Into<String>) -> Self {
        Dataset {
            records,
            provenance: provenance.into(),
            meta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedUtterance> {
        self.records.iter()
    }

    /// Concatenates two datasets; parallel metadata survives only if both carry it.
    pub fn concat(mut self, other: Dataset) -> Dataset {
        self.meta = match (self.meta.take(), other.meta) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            _ => None,
        };
        self.records.extend(other.records);
        self.provenance = format!("{}+{}", self.provenance, other.provenance);
        self
    }

    pub fn intent_distribution(&self) -> IntentDistribution {
        intent_distribution(self)
    }
}

/// Closed label inventory used to reject unknown labels while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSchema {
    pub intents: BTreeSet<String>,
    pub slots: BTreeSet<String>,
}

impl LabelSchema {
    pub fn from_dataset(d: &Dataset) -> Self {
        let mut schema = LabelSchema::default();
        for u in &d.records {
            schema.intents.insert(u.intent.clone());
            schema.slots.extend(u.slots.iter().map(|s| s.label.clone()));
        }
        schema
    }

    pub(crate) fn check(&self, u: &AnnotatedUtterance, line: usize) -> Result<(), CorpusError> {
        if !self.intents.contains(&u.intent) {
            return Err(CorpusError::Schema {
                line,
                kind: "intent",
                label: u.intent.clone(),
            });
        }
        if let Some(s) = u.slots.iter().find(|s| !self.slots.contains(&s.label)) {
            return Err(CorpusError::Schema {
                line,
                kind: "slot",
                label: s.label.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentDistribution {
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl IntentDistribution {
    pub fn get(&self, intent: &str) -> usize {
        self.counts.get(intent).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: &IntentDistribution) -> Self {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
        self.total += other.total;
        self
    }
}

impl fmt::Display for IntentDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.counts {
            writeln!(f, "{k}\t{v}")?;
        }
        write!(f, "total\t{}", self.total)
    }
}

pub fn intent_distribution(d: &Dataset) -> IntentDistribution {
    let mut dist = IntentDistribution::default();
    for u in &d.records {
        *dist.counts.entry(u.intent.clone()).or_default() += 1;
    }
    dist.total = d.records.len();
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(intent: &str) -> AnnotatedUtterance {
        AnnotatedUtterance::new(vec!["x".into()], intent, "en", vec![]).unwrap()
    }

    #[test]
    fn rejects_overlapping_spans() {
        let toks: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let err = AnnotatedUtterance::new(
            toks,
            "i",
            "en",
            vec![SlotSpan::new(0, 1, "x"), SlotSpan::new(1, 2, "y")],
        );
        assert!(matches!(err, Err(CorpusError::InvalidUtterance(_))));
    }

    #[test]
    fn rejects_out_of_range_and_whitespace_tokens() {
        assert!(AnnotatedUtterance::new(vec!["a".into()], "i", "en", vec![SlotSpan::new(0, 1, "x")]).is_err());
        assert!(AnnotatedUtterance::new(vec!["a b".into()], "i", "en", vec![]).is_err());
        assert!(AnnotatedUtterance::new(vec!["a".into()], "i", "en", vec![SlotSpan::new(0, 0, "")]).is_err());
    }

    #[test]
    fn distribution_counts() {
        let d = Dataset::new(vec![rec("flight"), rec("flight"), rec("airfare"), rec("flight")], "t");
        let dist = intent_distribution(&d);
        assert_eq!(dist.get("flight"), 3);
        assert_eq!(dist.get("airfare"), 1);
        assert_eq!(dist.total, 4);

        let empty = intent_distribution(&Dataset::default());
        assert!(empty.counts.is_empty());
        assert_eq!(empty.total, 0);
    }

    #[test]
    fn distribution_is_additive() {
        let a = Dataset::new(vec![rec("flight"), rec("airfare")], "a");
        let b = Dataset::new(vec![rec("flight")], "b");
        let merged = intent_distribution(&a).merge(&intent_distribution(&b));
        assert_eq!(merged, intent_distribution(&a.concat(b)));
    }

    #[test]
    fn primary_language_subtag() {
        let mut u = rec("x");
        u.language = "en-US".into();
        assert!(u.is_english());
        u.language = "de_DE".into();
        assert_eq!(u.primary_language(), "de");
    }
}
