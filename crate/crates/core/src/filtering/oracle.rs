use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_tagging, SlotSpan};
use crate::remote::{JsonClient, RemoteError, RetryPolicy};

/// An IC+ST prediction for one utterance. Spans index whitespace tokens and
/// use inclusive ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub intent: String,
    #[serde(default)]
    pub spans: Vec<SlotSpan>,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle unavailable after {attempts} attempt(s): {message}")]
    OracleUnavailable { attempts: u32, message: String },
    #[error("oracle protocol error: {0}")]
    Protocol(String),
}

impl OracleError {
    pub fn is_systemic(&self) -> bool {
        matches!(self, OracleError::OracleUnavailable { .. })
    }
}

/// Tags whitespace-tokenized text with an intent and slot spans.
///
/// Implementations must be deterministic for a fixed trained state.
pub trait TaggerOracle: Send + Sync {
    fn tag(&self, text: &str, language: &str) -> Result<Hypothesis, OracleError>;

    fn tag_batch(&self, texts: &[String], language: &str) -> Result<Vec<Hypothesis>, OracleError> {
        texts.iter().map(|t| self.tag(t, language)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRequest {
    pub text: String,
    pub language: String,
}

/// Tagger served over HTTP (`POST /tag`).
#[derive(Debug, Clone)]
pub struct RemoteOracle {
    client: JsonClient,
}

impl RemoteOracle {
    pub fn new(url: impl Into<String>, retry: RetryPolicy) -> Self {
        RemoteOracle {
            client: JsonClient::new(url, retry),
        }
    }
}

impl TaggerOracle for RemoteOracle {
    fn tag(&self, text: &str, language: &str) -> Result<Hypothesis, OracleError> {
        let req = TagRequest {
            text: text.to_string(),
            language: language.to_string(),
        };
        let hyp: Hypothesis = self.client.post("/tag", &req).map_err(|e| match e {
            RemoteError::Unavailable { attempts, message } => OracleError::OracleUnavailable { attempts, message },
            RemoteError::Protocol(m) => OracleError::Protocol(m),
        })?;
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let mut spans = hyp.spans.clone();
        spans.sort_by_key(|s| (s.start, s.end));
        validate_tagging(&tokens, &spans).map_err(|e| OracleError::Protocol(format!("bad spans for {text:?}: {e}")))?;
        Ok(Hypothesis {
            intent: hyp.intent,
            spans,
        })
    }
}
