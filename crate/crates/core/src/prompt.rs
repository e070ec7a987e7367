//! Instruction prompts with per-slot copy / translate / localize controls.
//!
//! A rendered prompt looks like:
//!
//! ```text
//! <language> German </language>
//! <domain> travelinfo </domain>
//! <intent> flight </intent>
//! <include>
//! [1 translation( first class ) ] , [2 localization( united airlines ) ]
//! </include>
//! <labels>
//! [1=fare_class , [2=airline
//! </labels>
//! <examples>
//! i need a [1 first class ] ticket on [2 united airlines ]
//! </examples>
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bracket::{self, BracketError, BracketString, IndexLabels};
use crate::corpus::{primary_subtag, AnnotatedUtterance, Dataset};

const MATIS_POLICY: &str = include_str!("../data/matis_policy.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotOperation {
    #[serde(alias = "copy")]
    Unchanged,
    Translation,
    Localization,
}

impl SlotOperation {
    pub fn keyword(self) -> &'static str {
        match self {
            SlotOperation::Unchanged => "unchanged",
            SlotOperation::Translation => "translation",
            SlotOperation::Localization => "localization",
        }
    }
}

impl FromStr for SlotOperation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unchanged" | "copy" => Ok(SlotOperation::Unchanged),
            "translation" => Ok(SlotOperation::Translation),
            "localization" => Ok(SlotOperation::Localization),
            _ => Err(format!("unknown slot operation {s:?}")),
        }
    }
}

impl fmt::Display for SlotOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotInstruction {
    pub index: u32,
    pub operation: SlotOperation,
    pub source_value: String,
    pub label: String,
}

/// Target language as rendered in prompts (English name) plus its code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetLanguage {
    pub code: String,
    pub name: String,
}

const LANGUAGE_NAMES: &[(&str, &str)] = &[
    ("ar", "Arabic"),
    ("de", "German"),
    ("en", "English"),
    ("es", "Spanish"),
    ("fr", "French"),
    ("hi", "Hindi"),
    ("it", "Italian"),
    ("ja", "Japanese"),
    ("ko", "Korean"),
    ("nl", "Dutch"),
    ("pt", "Portuguese"),
    ("ru", "Russian"),
    ("tr", "Turkish"),
    ("zh", "Chinese"),
];

impl TargetLanguage {
    pub fn new(code: impl Into<String>, name: impl Into<String>) -> Self {
        TargetLanguage {
            code: code.into(),
            name: name.into(),
        }
    }

    /// Looks up the English name of a language code (`"de"`, `"de-DE"`).
    pub fn from_code(code: &str) -> Option<Self> {
        let primary = primary_subtag(code);
        LANGUAGE_NAMES
            .iter()
            .find(|(c, _)| *c == primary)
            .map(|(c, n)| TargetLanguage::new(*c, *n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPrompt {
    pub target_language: TargetLanguage,
    pub domain: String,
    pub intent: String,
    pub instructions: Vec<SlotInstruction>,
    pub example: BracketString,
}

impl GenerationPrompt {
    /// The index -> label map a candidate is validated against.
    pub fn labels(&self) -> IndexLabels {
        self.instructions.iter().map(|i| (i.index, i.label.clone())).collect()
    }

    pub fn render(&self) -> String {
        serialize_prompt(self)
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("source record must be English, found language {0:?}")]
    NonEnglishSource(String),
    #[error("english record has {english} slots, target record has {target}")]
    SlotCountMismatch { english: usize, target: usize },
    #[error("no replacement-method judgment for slot {slot}")]
    MissingJudgment { slot: usize },
    #[error("record {id:?}: {message}")]
    Misaligned { id: String, message: String },
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error("policy line {line}: {message}")]
    Policy { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Slot label -> operation, total through `default`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationPolicy {
    pub by_label: BTreeMap<String, SlotOperation>,
    pub default: SlotOperation,
}

impl Default for OperationPolicy {
    fn default() -> Self {
        OperationPolicy {
            by_label: BTreeMap::new(),
            default: SlotOperation::Translation,
        }
    }
}

impl OperationPolicy {
    pub fn uniform(op: SlotOperation) -> Self {
        OperationPolicy {
            by_label: BTreeMap::new(),
            default: op,
        }
    }

    /// The built-in MultiATIS++ slot operation table.
    pub fn matis() -> Self {
        Self::parse(MATIS_POLICY).expect("bundled policy parses")
    }

    pub fn with(mut self, label: impl Into<String>, op: SlotOperation) -> Self {
        self.by_label.insert(label.into(), op);
        self
    }

    pub fn operation(&self, label: &str) -> SlotOperation {
        self.by_label.get(label).copied().unwrap_or(self.default)
    }

    /// Parses `label = op` lines; `#` starts a comment, `default = op` sets the fallback.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut policy = OperationPolicy::default();
        let mut default_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PromptError::Policy { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `label = operation`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                return Err(err(format!("invalid slot label {key:?}")));
            }
            let op: SlotOperation = value.parse().map_err(err)?;
            if key == "default" {
                if default_seen {
                    return Err(err("duplicate default".into()));
                }
                default_seen = true;
                policy.default = op;
            } else if policy.by_label.insert(key.to_string(), op).is_some() {
                return Err(err(format!("duplicate label {key:?}")));
            }
        }
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("default = {}\n", self.default);
        for (label, op) in &self.by_label {
            out.push_str(&format!("{label} = {op}\n"));
        }
        out
    }
}

/// One instruction per span, in span order, with indices `1..=n`.
pub fn assign_operations(u: &AnnotatedUtterance, policy: &OperationPolicy) -> Vec<SlotInstruction> {
    let ops: Vec<SlotOperation> = u.slots.iter().map(|s| policy.operation(&s.label)).collect();
    instructions_with(u, &ops)
}

fn instructions_with(u: &AnnotatedUtterance, ops: &[SlotOperation]) -> Vec<SlotInstruction> {
    u.slots
        .iter()
        .zip(ops)
        .enumerate()
        .map(|(i, (span, &operation))| SlotInstruction {
            index: i as u32 + 1,
            operation,
            source_value: u.span_text(span),
            label: span.label.clone(),
        })
        .collect()
}

pub fn build_prompt(
    u: &AnnotatedUtterance,
    target: &TargetLanguage,
    domain: &str,
    policy: &OperationPolicy,
) -> Result<GenerationPrompt, PromptError> {
    let ops: Vec<SlotOperation> = u.slots.iter().map(|s| policy.operation(&s.label)).collect();
    build_prompt_with_operations(u, target, domain, &ops)
}

/// Builds a prompt with explicit per-slot operations (e.g. human judgments).
pub fn build_prompt_with_operations(
    u: &AnnotatedUtterance,
    target: &TargetLanguage,
    domain: &str,
    ops: &[SlotOperation],
) -> Result<GenerationPrompt, PromptError> {
    if !u.is_english() {
        return Err(PromptError::NonEnglishSource(u.language.clone()));
    }
    if ops.len() != u.slots.len() {
        return Err(PromptError::MissingJudgment {
            slot: ops.len().min(u.slots.len()) + 1,
        });
    }
    Ok(GenerationPrompt {
        target_language: target.clone(),
        domain: domain.to_string(),
        intent: u.intent.clone(),
        instructions: instructions_with(u, ops),
        example: bracket::serialize_canonical(u)?,
    })
}

pub fn serialize_prompt(p: &GenerationPrompt) -> String {
    let include: Vec<String> = p
        .instructions
        .iter()
        .map(|i| format!("[{} {}( {} ) ]", i.index, i.operation, i.source_value))
        .collect();
    let labels: Vec<String> = p
        .instructions
        .iter()
        .map(|i| format!("[{}={}", i.index, i.label))
        .collect();
    let mut out = String::new();
    out.push_str(&format!("<language> {} </language>\n", p.target_language.name));
    out.push_str(&format!("<domain> {} </domain>\n", p.domain));
    out.push_str(&format!("<intent> {} </intent>\n", p.intent));
    push_block(&mut out, "include", &include.join(" , "));
    push_block(&mut out, "labels", &labels.join(" , "));
    push_block(&mut out, "examples", p.example.as_str());
    out.pop();
    out
}

fn push_block(out: &mut String, tag: &str, body: &str) {
    out.push_str(&format!("<{tag}>\n"));
    if !body.is_empty() {
        out.push_str(body);
        out.push('\n');
    }
    out.push_str(&format!("</{tag}>\n"));
}

/// An English record aligned with its translation and the per-slot judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPair {
    pub id: String,
    pub english: AnnotatedUtterance,
    pub target: AnnotatedUtterance,
    /// Judgment for each English slot, in English span order.
    pub judgments: Vec<Option<SlotOperation>>,
    /// Prompt index (1-based English span position) of each target span.
    pub target_indices: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub id: String,
    pub prompt: String,
    pub target: BracketString,
}

/// Joins English and `target_locale` records of a parallel corpus by id.
///
/// Slots are aligned through the bracket indices of the source file: the
/// English span with bracket index k pairs with the target span with index k.
pub fn pair_parallel(d: &Dataset, target_locale: &str) -> Result<Vec<ParallelPair>, PromptError> {
    let meta = d.meta.as_ref().ok_or_else(|| PromptError::Misaligned {
        id: String::new(),
        message: "dataset carries no parallel annotations".into(),
    })?;
    let mut english: BTreeMap<&str, usize> = BTreeMap::new();
    let mut targets: Vec<usize> = Vec::new();
    for (i, (u, m)) in d.records.iter().zip(meta).enumerate() {
        if u.is_english() {
            english.insert(m.id.as_str(), i);
        } else if u.language == target_locale || u.primary_language() == target_locale {
            targets.push(i);
        }
    }
    let mut pairs = Vec::new();
    for t in targets {
        let tm = &meta[t];
        let Some(&e) = english.get(tm.id.as_str()) else {
            log::warn!("record {} has no English counterpart; skipped", tm.id);
            continue;
        };
        let (eu, em) = (&d.records[e], &meta[e]);
        let tu = &d.records[t];
        if eu.slots.len() != tu.slots.len() {
            return Err(PromptError::SlotCountMismatch {
                english: eu.slots.len(),
                target: tu.slots.len(),
            });
        }
        let position_of = |k: u32| em.slot_indices.iter().position(|&x| x == k);
        let mut judgments = vec![None; eu.slots.len()];
        let mut target_indices = Vec::with_capacity(tu.slots.len());
        for (j, &k) in tm.slot_indices.iter().enumerate() {
            let p = position_of(k).ok_or_else(|| PromptError::Misaligned {
                id: tm.id.clone(),
                message: format!("target bracket index {k} has no English counterpart"),
            })?;
            if eu.slots[p].label != tu.slots[j].label {
                return Err(PromptError::Misaligned {
                    id: tm.id.clone(),
                    message: format!(
                        "index {k} labeled {} in English but {} in target",
                        eu.slots[p].label, tu.slots[j].label
                    ),
                });
            }
            judgments[p] = tm.slot_methods.get(j).copied().flatten();
            target_indices.push(p as u32 + 1);
        }
        pairs.push(ParallelPair {
            id: tm.id.clone(),
            english: eu.clone(),
            target: tu.clone(),
            judgments,
            target_indices,
        });
    }
    Ok(pairs)
}

/// Prompt/target pairs whose operations come from human judgments.
pub fn extract_training_pairs(pairs: &[ParallelPair], default_domain: &str) -> Result<Vec<TrainingPair>, PromptError> {
    pairs
        .iter()
        .map(|pair| {
            let n = pair.english.slots.len();
            if pair.target.slots.len() != n || pair.target_indices.len() != n {
                return Err(PromptError::SlotCountMismatch {
                    english: n,
                    target: pair.target.slots.len(),
                });
            }
            let ops = (0..n)
                .map(|i| {
                    pair.judgments
                        .get(i)
                        .copied()
                        .flatten()
                        .ok_or(PromptError::MissingJudgment { slot: i + 1 })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let code = primary_subtag(&pair.target.language);
            let language =
                TargetLanguage::from_code(&code).unwrap_or_else(|| TargetLanguage::new(code.clone(), code.clone()));
            let domain = pair.english.domain.as_deref().unwrap_or(default_domain);
            let prompt = build_prompt_with_operations(&pair.english, &language, domain, &ops)?;
            let (target, _) =
                bracket::serialize_brackets(&pair.target.tokens, &pair.target.slots, &pair.target_indices)?;
            Ok(TrainingPair {
                id: pair.id.clone(),
                prompt: serialize_prompt(&prompt),
                target,
            })
        })
        .collect()
}
