use std::fmt;
use std::str::FromStr;

use super::{CorpusError, SlotSpan};

/// How orphan `I-X` tags are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BioMode {
    #[default]
    Strict,
    /// An `I-X` that does not continue an `X` group opens a new group.
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BioTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl FromStr for BioTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        let (prefix, label) = s
            .split_once('-')
            .ok_or_else(|| CorpusError::MalformedTag(s.to_string()))?;
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(CorpusError::MalformedTag(s.to_string()));
        }
        match prefix {
            "B" => Ok(BioTag::Begin(label.to_string())),
            "I" => Ok(BioTag::Inside(label.to_string())),
            _ => Err(CorpusError::MalformedTag(s.to_string())),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(l) => write!(f, "B-{l}"),
            BioTag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

/// Groups a BIO tag sequence into spans.
///
/// `tokens` is only used for the length check; token content is validated by
/// the caller when the record is assembled.
pub fn parse_bio<S: AsRef<str>>(tokens: &[S], tags: &[S], mode: BioMode) -> Result<Vec<SlotSpan>, CorpusError> {
    if tokens.len() != tags.len() {
        return Err(CorpusError::LengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let mut spans: Vec<SlotSpan> = Vec::new();
    let mut open = false;
    for (i, raw) in tags.iter().enumerate() {
        match raw.as_ref().parse::<BioTag>()? {
            BioTag::Outside => open = false,
            BioTag::Begin(label) => {
                spans.push(SlotSpan::new(i, i, label));
                open = true;
            }
            BioTag::Inside(label) => {
                let continues = open && spans.last().is_some_and(|s| s.label == label);
                if continues {
                    spans.last_mut().expect("open span").end = i;
                } else if mode == BioMode::Repair {
                    spans.push(SlotSpan::new(i, i, label));
                    open = true;
                } else {
                    return Err(CorpusError::IllegalTagSequence {
                        position: i,
                        tag: raw.as_ref().to_string(),
                    });
                }
            }
        }
    }
    Ok(spans)
}

/// Renders spans as a BIO tag sequence over `len` tokens.
pub fn to_bio(len: usize, slots: &[SlotSpan]) -> Vec<String> {
    let mut tags = vec![BioTag::Outside.to_string(); len];
    for span in slots {
        tags[span.start] = BioTag::Begin(span.label.clone()).to_string();
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = BioTag::Inside(span.label.clone()).to_string();
        }
    }
    tags
}

impl super::AnnotatedUtterance {
    pub fn from_bio<S: AsRef<str>>(
        tokens: &[S],
        tags: &[S],
        intent: impl Into<String>,
        language: impl Into<String>,
        mode: BioMode,
    ) -> Result<Self, CorpusError> {
        let slots = parse_bio(tokens, tags, mode)?;
        let tokens = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        Self::new(tokens, intent, language, slots)
    }

    pub fn to_bio(&self) -> (Vec<String>, Vec<String>) {
        (self.tokens.clone(), to_bio(self.tokens.len(), &self.slots))
    }
}
