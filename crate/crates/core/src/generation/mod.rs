//! n-best candidate generation against a pluggable backend.

mod mock;
mod remote;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bracket::BracketString;
use crate::prompt::GenerationPrompt;

pub use mock::{mock_generate, LanguageLexicon, MockBackend, MockLexicon, NoiseRates};
pub use remote::RemoteBackend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub n: usize,
    pub top_p: f64,
    pub temperature: f64,
    /// Drop repeated candidate texts, keeping the first occurrence.
    pub dedup: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n: 8,
            top_p: 0.95,
            temperature: 1.0,
            dedup: false,
        }
    }
}

impl SamplingConfig {
    pub fn with_n(n: usize) -> Self {
        SamplingConfig { n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.n == 0 {
            return Err(GenerationError::InvalidConfig("n must be positive".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenerationError::InvalidConfig(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(GenerationError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: BracketString,
    #[serde(default)]
    pub perplexity: Option<f64>,
}

impl Candidate {
    pub fn new(text: impl Into<BracketString>) -> Self {
        Candidate {
            text: text.into(),
            perplexity: None,
        }
    }

    pub fn with_perplexity(text: impl Into<BracketString>, perplexity: f64) -> Self {
        Candidate {
            text: text.into(),
            perplexity: Some(perplexity),
        }
    }
}

/// Filtering stages that record verdicts on a [`CandidateSet`].
///
/// Serialized as `heuristic`, `intent_filter` or `agreement_<round>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Heuristic,
    IntentFilter,
    /// Tagger agreement in IFM round `r`.
    Agreement(u32),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Heuristic => f.write_str("heuristic"),
            Stage::IntentFilter => f.write_str("intent_filter"),
            Stage::Agreement(r) => write!(f, "agreement_{r}"),
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heuristic" => Ok(Stage::Heuristic),
            "intent_filter" => Ok(Stage::IntentFilter),
            _ => s
                .strip_prefix("agreement_")
                .and_then(|r| r.parse().ok())
                .map(Stage::Agreement)
                .ok_or_else(|| format!("unknown stage {s:?}")),
        }
    }
}

impl Serialize for Stage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Stage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub prompt_id: String,
    pub candidates: Vec<Candidate>,
    /// One verdict map per candidate. A candidate survives while every
    /// recorded verdict is a pass.
    pub stage_verdicts: Vec<BTreeMap<Stage, bool>>,
}

impl CandidateSet {
    pub fn new(prompt_id: impl Into<String>, candidates: Vec<Candidate>) -> Self {
        let stage_verdicts = vec![BTreeMap::new(); candidates.len()];
        CandidateSet {
            prompt_id: prompt_id.into(),
            candidates,
            stage_verdicts,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn is_survivor(&self, i: usize) -> bool {
        self.stage_verdicts[i].values().all(|&pass| pass)
    }

    /// Indices of candidates that passed every recorded stage.
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.candidates.len()).filter(|&i| self.is_survivor(i)).collect()
    }

    pub fn record(&mut self, i: usize, stage: Stage, pass: bool) {
        self.stage_verdicts[i].insert(stage, pass);
    }

    pub fn verdict(&self, i: usize, stage: Stage) -> Option<bool> {
        self.stage_verdicts[i].get(&stage).copied()
    }

    /// Number of candidates that have a recorded pass for `stage`.
    pub fn passed(&self, stage: Stage) -> usize {
        (0..self.len())
            .filter(|&i| self.verdict(i, stage) == Some(true))
            .count()
    }

    pub fn has_perplexities(&self) -> bool {
        !self.candidates.is_empty() && self.candidates.iter().all(|c| c.perplexity.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCapabilities {
    pub supports_perplexity: bool,
    pub max_concurrency: usize,
    /// Identical (prompt, config, seed) yields identical candidates.
    pub deterministic: bool,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("backend protocol error: {0}")]
    BackendProtocolError(String),
    #[error("mock lexicon for {language:?} does not cover {phrase:?}")]
    LexiconGap { language: String, phrase: String },
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

impl GenerationError {
    /// Errors that indicate the backend as a whole is unusable.
    pub fn is_systemic(&self) -> bool {
        matches!(self, GenerationError::BackendUnavailable { .. })
    }
}

pub trait GeneratorBackend: Send + Sync {
    fn capabilities(&self) -> BackendCapabilities;

    /// Returns raw candidates in backend order.
    fn generate_raw(
        &self,
        prompt_id: &str,
        prompt: &GenerationPrompt,
        config: &SamplingConfig,
    ) -> Result<Vec<Candidate>, GenerationError>;
}

/// Samples up to `config.n` candidates for one prompt.
pub fn generate(
    backend: &dyn GeneratorBackend,
    prompt_id: &str,
    prompt: &GenerationPrompt,
    config: &SamplingConfig,
) -> Result<CandidateSet, GenerationError> {
    config.validate()?;
    let mut candidates = backend.generate_raw(prompt_id, prompt, config)?;
    if candidates.len() > config.n {
        log::warn!(
            "backend returned {} candidates for {prompt_id}, keeping {}",
            candidates.len(),
            config.n
        );
        candidates.truncate(config.n);
    }
    let with_ppl = candidates.iter().filter(|c| c.perplexity.is_some()).count();
    if with_ppl != 0 && with_ppl != candidates.len() {
        return Err(GenerationError::BackendProtocolError(format!(
            "perplexity present for {with_ppl} of {} candidates",
            candidates.len()
        )));
    }
    if let Some(bad) = candidates
        .iter()
        .filter_map(|c| c.perplexity)
        .find(|p| !(p.is_finite() && *p >= 0.0))
    {
        return Err(GenerationError::BackendProtocolError(format!(
            "invalid perplexity {bad}"
        )));
    }
    if config.dedup {
        let mut seen = HashSet::new();
        candidates.retain(|c| seen.insert(c.text.clone()));
    }
    Ok(CandidateSet::new(prompt_id, candidates))
}
