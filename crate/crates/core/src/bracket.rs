//! The numbered-bracket slot grammar: `i need a [1 first class ] ticket`.
//!
//! ```text
//! utterance := (word | slot)*
//! slot      := "[" INT word+ "]"
//! ```
//!
//! Words are maximal runs of non-whitespace characters other than `[` and `]`.
//! The index must follow `[` directly, be a positive integer without sign or
//! leading zeros, and end at whitespace. Nested brackets are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedUtterance, SlotSpan};

/// Bracket index -> slot label.
pub type IndexLabels = BTreeMap<u32, String>;

/// Raw candidate text in the bracket grammar; may be malformed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BracketString(String);

impl BracketString {
    pub fn new(s: impl Into<String>) -> Self {
        BracketString(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl From<&str> for BracketString {
    fn from(s: &str) -> Self {
        BracketString(s.to_string())
    }
}

impl From<String> for BracketString {
    fn from(s: String) -> Self {
        BracketString(s)
    }
}

impl AsRef<str> for BracketString {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BracketString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    UnbalancedBrackets,
    UnknownIndex,
    MissingIndex,
    DuplicateIndex,
    EmptySlotValue,
    NestedBrackets,
    BadIndexToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    /// Character (not byte) offset into the input.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn kinds(&self) -> BTreeSet<FailureKind> {
        self.failures.iter().map(|f| f.kind).collect()
    }

    pub fn has(&self, kind: FailureKind) -> bool {
        self.failures.iter().any(|f| f.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return f.write_str("ok");
        }
        for (i, fail) in self.failures.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{:?}@{}", fail.kind, fail.position)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    /// Every expected index appears exactly once.
    #[default]
    Exact,
    /// Expected indices may be omitted; unknown and duplicate indices still fail.
    Subset,
}

/// Successful parse: tokens without markers, spans labeled from the expected map,
/// and the bracket index of each span (same order as `slots`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketParse {
    pub tokens: Vec<String>,
    pub slots: Vec<SlotSpan>,
    pub indices: Vec<u32>,
}

impl BracketParse {
    pub fn into_utterance(
        self,
        intent: impl Into<String>,
        language: impl Into<String>,
        domain: Option<String>,
    ) -> AnnotatedUtterance {
        AnnotatedUtterance {
            tokens: self.tokens,
            intent: intent.into(),
            domain,
            language: language.into(),
            slots: self.slots,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BracketError {
    #[error("index map covers {given} positions but the utterance has {slots} slots")]
    IndexMapMismatch { given: usize, slots: usize },
    #[error("index map is not a bijection onto distinct positive indices")]
    IndexMapNotBijective,
    #[error("token {0:?} contains a bracket and cannot be serialized")]
    UnrepresentableToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme<'a> {
    Open { index: Option<u32>, pos: usize },
    Close { pos: usize },
    Word { text: &'a str },
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && c != '[' && c != ']'
}

fn parse_index(tok: &str) -> Option<u32> {
    let mut chars = tok.chars();
    match chars.next() {
        Some('1'..='9') => {}
        _ => return None,
    }
    if !chars.all(|c| c.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

fn lex(s: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    // indexed by char position: (byte offset, char)
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(s.len(), |&(b, _)| b);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
        } else if c == ']' {
            out.push(Lexeme::Close { pos: i });
            i += 1;
        } else if c == '[' {
            let pos = i;
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j].1) {
                j += 1;
            }
            let tok = &s[byte_at(i + 1)..byte_at(j)];
            out.push(Lexeme::Open {
                index: parse_index(tok),
                pos,
            });
            i = j;
        } else {
            let mut j = i;
            while j < chars.len() && is_word_char(chars[j].1) {
                j += 1;
            }
            out.push(Lexeme::Word {
                text: &s[byte_at(i)..byte_at(j)],
            });
            i = j;
        }
    }
    out
}

struct Scan {
    parse: BracketParse,
    report: ValidationReport,
}

fn scan(s: &str, expected: &IndexLabels, mode: ValidationMode) -> Scan {
    let mut tokens: Vec<String> = Vec::new();
    let mut slots = Vec::new();
    let mut indices = Vec::new();
    let mut failures = Vec::new();
    let mut seen: BTreeSet<u32> = BTreeSet::new();

    let mut depth = 0usize;
    // outermost open bracket: (position, usable index, first token)
    let mut current: Option<(usize, Option<u32>, usize)> = None;

    let mut fail = |kind, position| failures.push(Failure { kind, position });

    for lexeme in lex(s) {
        match lexeme {
            Lexeme::Word { text } => tokens.push(text.to_string()),
            Lexeme::Open { index, pos } => {
                if depth > 0 {
                    fail(FailureKind::NestedBrackets, pos);
                    depth += 1;
                    continue;
                }
                depth = 1;
                let usable = match index {
                    None => {
                        fail(FailureKind::BadIndexToken, pos);
                        None
                    }
                    Some(k) if !expected.contains_key(&k) => {
                        fail(FailureKind::UnknownIndex, pos);
                        None
                    }
                    Some(k) if !seen.insert(k) => {
                        fail(FailureKind::DuplicateIndex, pos);
                        None
                    }
                    Some(k) => Some(k),
                };
                current = Some((pos, usable, tokens.len()));
            }
            Lexeme::Close { pos } => {
                if depth == 0 {
                    fail(FailureKind::UnbalancedBrackets, pos);
                    continue;
                }
                depth -= 1;
                if depth > 0 {
                    continue;
                }
                let (_, usable, first) = current.take().expect("open slot");
                if first == tokens.len() {
                    fail(FailureKind::EmptySlotValue, pos);
                } else if let Some(k) = usable {
                    slots.push(SlotSpan::new(first, tokens.len() - 1, expected[&k].clone()));
                    indices.push(k);
                }
            }
        }
    }
    if depth > 0 {
        let (pos, _, _) = current.expect("open slot");
        fail(FailureKind::UnbalancedBrackets, pos);
    }
    if mode == ValidationMode::Exact {
        let end = s.chars().count();
        for k in expected.keys() {
            if !seen.contains(k) {
                fail(FailureKind::MissingIndex, end);
            }
        }
    }
    Scan {
        parse: BracketParse { tokens, slots, indices },
        report: ValidationReport { failures },
    }
}

/// Parses in exact mode: every expected index must appear exactly once.
pub fn parse_brackets(s: &str, expected: &IndexLabels) -> Result<BracketParse, ValidationReport> {
    parse_brackets_with(s, expected, ValidationMode::Exact)
}

/// Parses, returning every failure found rather than a partial result.
pub fn parse_brackets_with(
    s: &str,
    expected: &IndexLabels,
    mode: ValidationMode,
) -> Result<BracketParse, ValidationReport> {
    let Scan { parse, report } = scan(s, expected, mode);
    if report.ok() {
        Ok(parse)
    } else {
        Err(report)
    }
}

pub fn validate(s: &str, expected: &IndexLabels, mode: ValidationMode) -> ValidationReport {
    scan(s, expected, mode).report
}

/// Serializes with `index_map[i]` as the bracket index of `slots[i]`.
///
/// Returns the bracket string and the induced index -> label map.
pub fn serialize_brackets(
    tokens: &[String],
    slots: &[SlotSpan],
    index_map: &[u32],
) -> Result<(BracketString, IndexLabels), BracketError> {
    if index_map.len() != slots.len() {
        return Err(BracketError::IndexMapMismatch {
            given: index_map.len(),
            slots: slots.len(),
        });
    }
    let distinct: BTreeSet<u32> = index_map.iter().copied().collect();
    if distinct.len() != index_map.len() || distinct.contains(&0) {
        return Err(BracketError::IndexMapNotBijective);
    }
    if let Some(bad) = tokens.iter().find(|t| t.contains(['[', ']'])) {
        return Err(BracketError::UnrepresentableToken(bad.clone()));
    }

    let mut parts: Vec<String> = Vec::with_capacity(tokens.len() + 2 * slots.len());
    let mut next = 0usize;
    for (span, &k) in slots.iter().zip(index_map) {
        parts.extend(tokens[next..span.start].iter().cloned());
        parts.push(format!("[{k}"));
        parts.extend(tokens[span.start..=span.end].iter().cloned());
        parts.push("]".to_string());
        next = span.end + 1;
    }
    parts.extend(tokens[next..].iter().cloned());

    let labels = slots
        .iter()
        .zip(index_map)
        .map(|(s, &k)| (k, s.label.clone()))
        .collect();
    Ok((BracketString(parts.join(" ")), labels))
}

/// Identity index map: the i-th span gets index i+1.
pub fn identity_index_map(n: usize) -> Vec<u32> {
    (1..=n as u32).collect()
}

pub fn serialize_canonical(u: &AnnotatedUtterance) -> Result<BracketString, BracketError> {
    serialize_brackets(&u.tokens, &u.slots, &identity_index_map(u.slots.len())).map(|(s, _)| s)
}

/// Labels of `u` keyed by identity index.
pub fn identity_labels(u: &AnnotatedUtterance) -> IndexLabels {
    u.slots
        .iter()
        .enumerate()
        .map(|(i, s)| (i as u32 + 1, s.label.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticket_labels() -> IndexLabels {
        [
            (1, "fare_class"),
            (2, "airline"),
            (3, "fromloc.city_name"),
            (4, "toloc.city_name"),
            (5, "date"),
        ]
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect()
    }

    const GERMAN: &str = "ich brauche ein [1 erste klasse ] ticket mit [2 lufthansa ] von [3 hamburg ] nach [4 köln ] für den [5 siebzehnten dezember ]";

    #[test]
    fn parses_german_output() {
        let p = parse_brackets(GERMAN, &ticket_labels()).unwrap();
        let labels: Vec<&str> = p.slots.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(
            labels,
            ["fare_class", "airline", "fromloc.city_name", "toloc.city_name", "date"]
        );
        assert_eq!(p.slots[0], SlotSpan::new(3, 4, "fare_class"));
        assert_eq!(p.tokens[p.slots[3].start], "köln");
        assert_eq!(p.slots[4], SlotSpan::new(14, 15, "date"));
        assert_eq!(p.indices, vec![1, 2, 3, 4, 5]);
        assert!(validate(GERMAN, &ticket_labels(), ValidationMode::Exact).ok());
    }

    #[test]
    fn plain_text() {
        let p = parse_brackets("hello world", &IndexLabels::new()).unwrap();
        assert_eq!(p.tokens, vec!["hello", "world"]);
        assert!(p.slots.is_empty());
    }

    #[test]
    fn unclosed_slot() {
        let expected = IndexLabels::from([(1, "city".to_string())]);
        let report = parse_brackets("book [1 denver", &expected).unwrap_err();
        assert_eq!(
            report.failures,
            vec![Failure {
                kind: FailureKind::UnbalancedBrackets,
                position: 5
            }]
        );
    }

    #[test]
    fn missing_index_exact_vs_subset() {
        let truncated = GERMAN.replace(" [5 siebzehnten dezember ]", " siebzehnten dezember");
        let exact = validate(&truncated, &ticket_labels(), ValidationMode::Exact);
        assert_eq!(exact.kinds(), BTreeSet::from([FailureKind::MissingIndex]));
        assert!(validate(&truncated, &ticket_labels(), ValidationMode::Subset).ok());
        assert!(parse_brackets_with(&truncated, &ticket_labels(), ValidationMode::Subset).is_ok());
    }

    #[test]
    fn unknown_index() {
        let s = format!("{GERMAN} [6 foo ]");
        let r = validate(&s, &ticket_labels(), ValidationMode::Subset);
        assert_eq!(r.kinds(), BTreeSet::from([FailureKind::UnknownIndex]));
    }

    #[test]
    fn every_failure_kind_is_reachable() {
        let exp = IndexLabels::from([(1, "a".to_string()), (2, "b".to_string())]);
        let cases = [
            ("x ] [1 y ] [2 z ]", FailureKind::UnbalancedBrackets),
            ("[1 y ] [2 z ] [3 w ]", FailureKind::UnknownIndex),
            ("[1 y ]", FailureKind::MissingIndex),
            ("[1 y ] [1 z ] [2 w ]", FailureKind::DuplicateIndex),
            ("[1 ] [2 z ]", FailureKind::EmptySlotValue),
            ("[1 y [2 z ] ]", FailureKind::NestedBrackets),
            ("[01 y ] [2 z ]", FailureKind::BadIndexToken),
            ("[-1 y ] [2 z ]", FailureKind::BadIndexToken),
            ("[ 1 y ] [2 z ]", FailureKind::BadIndexToken),
            ("[1y ] [2 z ]", FailureKind::BadIndexToken),
        ];
        for (s, kind) in cases {
            let r = validate(s, &exp, ValidationMode::Exact);
            assert!(r.has(kind), "{s:?} -> {r}");
        }
    }

    #[test]
    fn reports_all_failures() {
        let exp = IndexLabels::from([(1, "a".to_string())]);
        let r = validate("] [01 x ] [7 y ]", &exp, ValidationMode::Exact);
        assert_eq!(
            r.kinds(),
            BTreeSet::from([
                FailureKind::UnbalancedBrackets,
                FailureKind::BadIndexToken,
                FailureKind::UnknownIndex,
                FailureKind::MissingIndex
            ])
        );
    }

    #[test]
    fn accepts_whitespace_runs_and_attached_brackets() {
        let exp = IndexLabels::from([(1, "city".to_string())]);
        let p = parse_brackets("  to\t[1 new   york]  please ", &exp).unwrap();
        assert_eq!(p.tokens, vec!["to", "new", "york", "please"]);
        assert_eq!(p.slots, vec![SlotSpan::new(1, 2, "city")]);
    }

    #[test]
    fn positions_are_char_offsets() {
        let exp = IndexLabels::new();
        let r = validate("köln ]", &exp, ValidationMode::Exact);
        assert_eq!(r.failures[0].position, 5);
    }

    #[test]
    fn serializes_english_example() {
        let tokens: Vec<String> = "i need a first class ticket on united airlines from denver to baltimore scheduled for december seventeenth"
            .split(' ')
            .map(str::to_string)
            .collect();
        let slots = vec![
            SlotSpan::new(3, 4, "fare_class"),
            SlotSpan::new(7, 8, "airline"),
            SlotSpan::new(10, 10, "fromloc.city_name"),
            SlotSpan::new(12, 12, "toloc.city_name"),
            SlotSpan::new(15, 16, "date"),
        ];
        let (s, labels) = serialize_brackets(&tokens, &slots, &identity_index_map(5)).unwrap();
        assert_eq!(
            s.as_str(),
            "i need a [1 first class ] ticket on [2 united airlines ] from [3 denver ] to [4 baltimore ] scheduled for [5 december seventeenth ]"
        );
        assert_eq!(labels, ticket_labels());
        let back = parse_brackets(s.as_str(), &labels).unwrap();
        assert_eq!((back.tokens, back.slots), (tokens, slots));
    }

    #[test]
    fn serialize_errors() {
        let tokens = vec!["a".to_string(), "b".to_string()];
        let slots = vec![SlotSpan::new(0, 0, "x"), SlotSpan::new(1, 1, "y")];
        assert_eq!(
            serialize_brackets(&tokens, &slots, &[1]).unwrap_err(),
            BracketError::IndexMapMismatch { given: 1, slots: 2 }
        );
        assert_eq!(
            serialize_brackets(&tokens, &slots, &[2, 2]).unwrap_err(),
            BracketError::IndexMapNotBijective
        );
        assert!(matches!(
            serialize_brackets(&["[x".to_string()], &[], &[]),
            Err(BracketError::UnrepresentableToken(_))
        ));
        // zero slots: plain join
        let (s, labels) = serialize_brackets(&tokens, &[], &[]).unwrap();
        assert_eq!(s.as_str(), "a b");
        assert!(labels.is_empty());
    }

    #[test]
    fn non_identity_index_map() {
        let tokens: Vec<String> = ["from", "x", "to", "y"].iter().map(|s| s.to_string()).collect();
        let slots = vec![SlotSpan::new(1, 1, "from"), SlotSpan::new(3, 3, "to")];
        let (s, labels) = serialize_brackets(&tokens, &slots, &[2, 1]).unwrap();
        assert_eq!(s.as_str(), "from [2 x ] to [1 y ]");
        let p = parse_brackets(s.as_str(), &labels).unwrap();
        assert_eq!(p.slots, slots);
        assert_eq!(p.indices, vec![2, 1]);
    }
}
