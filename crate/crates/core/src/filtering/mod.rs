//! Staged post-processing of n-best candidates: heuristic bracket validation,
//! intent filtering through a tagger oracle, one-of-n selection and English
//! backoff.

mod oracle;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bracket::parse_brackets;
use crate::corpus::{AnnotatedUtterance, Dataset};
use crate::generation::{self, CandidateSet, GenerationError, GeneratorBackend, SamplingConfig, Stage};
use crate::prompt::{build_prompt, GenerationPrompt, OperationPolicy, PromptError, TargetLanguage};
use crate::rng::StreamKey;

pub use oracle::{Hypothesis, OracleError, RemoteOracle, TagRequest, TaggerOracle};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("no candidate survived filtering for {0}")]
    EmptyCandidateSet(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{0}")]
    Config(String),
}

impl FilterError {
    /// Backend or oracle unreachable.
    pub fn is_systemic(&self) -> bool {
        match self {
            FilterError::Generation(e) => e.is_systemic(),
            FilterError::Oracle(e) => e.is_systemic(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    #[default]
    Random,
    LowestPerplexity,
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SelectionMode::Random),
            "lowest-perplexity" => Ok(SelectionMode::LowestPerplexity),
            _ => Err(format!("unknown selection mode {s:?} (random | lowest-perplexity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionOutcome {
    Generated {
        utterance: AnnotatedUtterance,
        candidate_index: usize,
    },
    BackoffEnglish {
        original: AnnotatedUtterance,
    },
}

impl SelectionOutcome {
    pub fn utterance(&self) -> &AnnotatedUtterance {
        match self {
            SelectionOutcome::Generated { utterance, .. } => utterance,
            SelectionOutcome::BackoffEnglish { original } => original,
        }
    }

    pub fn candidate_index(&self) -> Option<usize> {
        match self {
            SelectionOutcome::Generated { candidate_index, .. } => Some(*candidate_index),
            SelectionOutcome::BackoffEnglish { .. } => None,
        }
    }

    pub fn is_generated(&self) -> bool {
        matches!(self, SelectionOutcome::Generated { .. })
    }
}

/// Counts behind one language's success-rate row.
///
/// `prompts` is the number of English records; `candidates` the number of
/// raw generations across them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub prompts: usize,
    pub candidates: usize,
    pub parse_pass: usize,
    pub ic_pass: usize,
    pub selected_generated: usize,
    pub backed_off: usize,
    /// Prompts whose generation or tagging failed (they back off).
    pub errors: usize,
}

pub const STATS_TSV_HEADER: &str = "lang\tprompts\tcandidates\tparse_pass\tic_pass\tgenerated\tcopied\terrors";

impl StageStats {
    pub fn merge(mut self, o: &StageStats) -> StageStats {
        self.prompts += o.prompts;
        self.candidates += o.candidates;
        self.parse_pass += o.parse_pass;
        self.ic_pass += o.ic_pass;
        self.selected_generated += o.selected_generated;
        self.backed_off += o.backed_off;
        self.errors += o.errors;
        self
    }

    /// Describes the first violated accounting identity.
    pub fn inconsistency(&self) -> Option<String> {
        if self.parse_pass > self.candidates {
            return Some(format!(
                "parse_pass {} > candidates {}",
                self.parse_pass, self.candidates
            ));
        }
        if self.ic_pass > self.parse_pass {
            return Some(format!("ic_pass {} > parse_pass {}", self.ic_pass, self.parse_pass));
        }
        if self.selected_generated + self.backed_off != self.prompts {
            return Some(format!(
                "generated {} + copied {} != prompts {}",
                self.selected_generated, self.backed_off, self.prompts
            ));
        }
        None
    }

    pub fn tsv_row(&self, language: &str) -> String {
        format!(
            "{language}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.prompts,
            self.candidates,
            self.parse_pass,
            self.ic_pass,
            self.selected_generated,
            self.backed_off,
            self.errors
        )
    }
}

impl fmt::Display for StageStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "prompts={} candidates={} parse={} ic={} generated={} copied={} errors={}",
            self.prompts,
            self.candidates,
            self.parse_pass,
            self.ic_pass,
            self.selected_generated,
            self.backed_off,
            self.errors
        )
    }
}

/// Renders per-language stats as TSV with a header line.
pub fn stats_to_tsv(rows: &[(String, StageStats)]) -> String {
    let mut out = String::from(STATS_TSV_HEADER);
    out.push('\n');
    for (lang, s) in rows {
        out.push_str(&s.tsv_row(lang));
        out.push('\n');
    }
    out
}

pub fn stats_from_tsv(text: &str) -> Result<Vec<(String, StageStats)>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == STATS_TSV_HEADER => {}
        _ => return Err("line 1: missing stats header".into()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            return Err(format!("line {}: expected 8 columns, found {}", i + 1, cols.len()));
        }
        let mut n = [0usize; 7];
        for (slot, col) in n.iter_mut().zip(&cols[1..]) {
            *slot = col.parse().map_err(|_| format!("line {}: bad count {col:?}", i + 1))?;
        }
        rows.push((
            cols[0].to_string(),
            StageStats {
                prompts: n[0],
                candidates: n[1],
                parse_pass: n[2],
                ic_pass: n[3],
                selected_generated: n[4],
                backed_off: n[5],
                errors: n[6],
            },
        ));
    }
    Ok(rows)
}

/// One English record, its prompt and the candidates generated for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPool {
    pub prompt_id: String,
    pub source: AnnotatedUtterance,
    pub prompt: GenerationPrompt,
    pub candidates: CandidateSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PromptPool {
    /// Parses candidate `i` against the prompt, in exact mode.
    pub fn parse(&self, i: usize) -> Option<AnnotatedUtterance> {
        parse_candidate(
            &self.prompt,
            self.source.domain.clone(),
            self.candidates.candidates[i].text.as_str(),
        )
    }
}

/// Parses `text` as an answer to `prompt`; `None` unless it validates in exact
/// mode and yields a well-formed utterance.
pub fn parse_candidate(prompt: &GenerationPrompt, domain: Option<String>, text: &str) -> Option<AnnotatedUtterance> {
    let parse = parse_brackets(text, &prompt.labels()).ok()?;
    if parse.tokens.is_empty() {
        return None;
    }
    let u = parse.into_utterance(prompt.intent.clone(), prompt.target_language.code.clone(), domain);
    u.validate().ok()?;
    Some(u)
}

/// Records a heuristic verdict for every candidate.
pub fn heuristic_filter(mut cs: CandidateSet, prompt: &GenerationPrompt) -> CandidateSet {
    for i in 0..cs.len() {
        let pass = parse_candidate(prompt, None, cs.candidates[i].text.as_str()).is_some();
        cs.record(i, Stage::Heuristic, pass);
    }
    cs
}

/// Tags current survivors and keeps those whose predicted intent matches the
/// prompted one. Non-survivors get no verdict.
pub fn ic_filter(
    mut cs: CandidateSet,
    prompt: &GenerationPrompt,
    oracle: &dyn TaggerOracle,
) -> Result<CandidateSet, OracleError> {
    let mut idx = Vec::new();
    let mut texts = Vec::new();
    for i in cs.survivors() {
        if let Some(u) = parse_candidate(prompt, None, cs.candidates[i].text.as_str()) {
            idx.push(i);
            texts.push(u.text());
        } else {
            cs.record(i, Stage::Heuristic, false);
        }
    }
    if texts.is_empty() {
        return Ok(cs);
    }
    let hyps = oracle.tag_batch(&texts, &prompt.target_language.code)?;
    if hyps.len() != texts.len() {
        return Err(OracleError::Protocol(format!(
            "{} hypotheses for {} texts",
            hyps.len(),
            texts.len()
        )));
    }
    for (i, h) in idx.into_iter().zip(hyps) {
        cs.record(i, Stage::IntentFilter, h.intent == prompt.intent);
    }
    Ok(cs)
}

/// Uniform draw among survivors keyed by `(seed, round, prompt_id)`.
pub fn select_random(cs: &CandidateSet, seed: u64, round: u32) -> Result<usize, FilterError> {
    let survivors = cs.survivors();
    if survivors.is_empty() {
        return Err(FilterError::EmptyCandidateSet(cs.prompt_id.clone()));
    }
    let mut rng = StreamKey::new("select")
        .u64(seed)
        .u64(round as u64)
        .str(&cs.prompt_id)
        .rng();
    Ok(survivors[rng.random_range(0..survivors.len())])
}

/// Survivor with the lowest perplexity, lowest index on ties. Without
/// perplexities the first survivor is returned.
pub fn select_lowest_perplexity(cs: &CandidateSet) -> Result<usize, FilterError> {
    let survivors = cs.survivors();
    let first = *survivors
        .first()
        .ok_or_else(|| FilterError::EmptyCandidateSet(cs.prompt_id.clone()))?;
    let mut best: Option<(usize, f64)> = None;
    for i in survivors {
        let Some(p) = cs.candidates[i].perplexity else {
            log::warn!("{}: no perplexity scores, taking first survivor", cs.prompt_id);
            return Ok(first);
        };
        if best.is_none_or(|(_, b)| p < b) {
            best = Some((i, p));
        }
    }
    Ok(best.map(|(i, _)| i).unwrap_or(first))
}

pub fn select(cs: &CandidateSet, mode: SelectionMode, seed: u64, round: u32) -> Result<usize, FilterError> {
    match mode {
        SelectionMode::Random => select_random(cs, seed, round),
        SelectionMode::LowestPerplexity => select_lowest_perplexity(cs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub sampling: SamplingConfig,
    pub selection: SelectionMode,
    /// Domain used for records that carry none.
    pub default_domain: String,
    pub jobs: usize,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            sampling: SamplingConfig::default(),
            selection: SelectionMode::Random,
            default_domain: "travel".into(),
            jobs: 1,
        }
    }
}

pub struct RoundOutput {
    /// One record per English input, in input order.
    pub dataset: Dataset,
    pub outcomes: Vec<SelectionOutcome>,
    pub pools: Vec<PromptPool>,
    pub stats: StageStats,
}

pub fn prompt_id(language: &str, index: usize) -> String {
    format!("{language}:{index}")
}

/// Runs `f` on a dedicated pool of `jobs` worker threads.
pub fn with_workers<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not start {jobs} workers ({e}); using the global pool");
            f()
        }
    }
}

/// Builds prompts for every English record and samples candidates.
///
/// Per-prompt generation errors are kept on the pool (which stays empty);
/// an unreachable backend aborts.
pub fn generate_pools(
    en_data: &Dataset,
    target: &TargetLanguage,
    backend: &dyn GeneratorBackend,
    policy: &OperationPolicy,
    config: &RoundConfig,
) -> Result<Vec<PromptPool>, FilterError> {
    config.sampling.validate()?;
    let prompts = en_data
        .iter()
        .map(|u| {
            let domain = u.domain.clone().unwrap_or_else(|| config.default_domain.clone());
            build_prompt(u, target, &domain, policy)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jobs = config.jobs.min(backend.capabilities().max_concurrency).max(1);
    with_workers(jobs, || {
        prompts
            .into_par_iter()
            .zip(en_data.records.par_iter())
            .enumerate()
            .map(|(i, (prompt, source))| {
                let id = prompt_id(&target.code, i);
                let (candidates, error) = match generation::generate(backend, &id, &prompt, &config.sampling) {
                    Ok(cs) => (cs, None),
                    Err(e) if e.is_systemic() => return Err(FilterError::from(e)),
                    Err(e) => {
                        log::warn!("{id}: {e}");
                        (CandidateSet::new(id.clone(), vec![]), Some(e.to_string()))
                    }
                };
                Ok(PromptPool {
                    prompt_id: id,
                    source: source.clone(),
                    prompt,
                    candidates,
                    error,
                })
            })
            .collect()
    })
}

fn filter_one(
    mut pool: PromptPool,
    oracle: Option<&dyn TaggerOracle>,
    config: &RoundConfig,
    seed: u64,
    round: u32,
) -> Result<(PromptPool, SelectionOutcome), FilterError> {
    let mut cs = heuristic_filter(pool.candidates, &pool.prompt);
    if let Some(oracle) = oracle {
        cs = match ic_filter(cs.clone(), &pool.prompt, oracle) {
            Ok(cs) => cs,
            Err(e) if e.is_systemic() => return Err(e.into()),
            Err(e) => {
                log::warn!("{}: {e}", pool.prompt_id);
                pool.error.get_or_insert_with(|| e.to_string());
                for i in cs.survivors() {
                    cs.record(i, Stage::IntentFilter, false);
                }
                cs
            }
        };
    }
    pool.candidates = cs;
    let outcome = match select(&pool.candidates, config.selection, seed, round) {
        Ok(i) => SelectionOutcome::Generated {
            utterance: pool.parse(i).expect("survivor parses"),
            candidate_index: i,
        },
        Err(_) => SelectionOutcome::BackoffEnglish {
            original: pool.source.clone(),
        },
    };
    Ok((pool, outcome))
}

/// Tallies stats for filtered pools. Without an oracle every parsed
/// candidate counts as passing the intent stage.
pub fn tally(pools: &[PromptPool], outcomes: &[SelectionOutcome], ic_enabled: bool) -> StageStats {
    let mut s = StageStats::default();
    for (pool, outcome) in pools.iter().zip(outcomes) {
        let cs = &pool.candidates;
        s.prompts += 1;
        s.candidates += cs.len();
        s.parse_pass += cs.passed(Stage::Heuristic);
        s.ic_pass += if ic_enabled {
            cs.passed(Stage::IntentFilter)
        } else {
            cs.passed(Stage::Heuristic)
        };
        if outcome.is_generated() {
            s.selected_generated += 1;
        } else {
            s.backed_off += 1;
        }
        s.errors += pool.error.is_some() as usize;
    }
    s
}

/// Filters generated pools and selects one output per prompt.
pub fn filter_pools(
    pools: Vec<PromptPool>,
    oracle: Option<&dyn TaggerOracle>,
    config: &RoundConfig,
    seed: u64,
    round: u32,
) -> Result<RoundOutput, FilterError> {
    let language = pools
        .first()
        .map(|p| p.prompt.target_language.code.clone())
        .unwrap_or_default();
    let results: Vec<(PromptPool, SelectionOutcome)> = with_workers(config.jobs, || {
        pools
            .into_par_iter()
            .map(|p| filter_one(p, oracle, config, seed, round))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let (pools, outcomes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let stats = tally(&pools, &outcomes, oracle.is_some());
    let dataset = Dataset::new(
        outcomes.iter().map(|o| o.utterance().clone()).collect(),
        format!("{language} round {round}"),
    );
    Ok(RoundOutput {
        dataset,
        outcomes,
        pools,
        stats,
    })
}

/// Generation followed by filtering for one target language.
#[allow(clippy::too_many_arguments)]
pub fn run_round(
    en_data: &Dataset,
    target: &TargetLanguage,
    backend: &dyn GeneratorBackend,
    oracle: Option<&dyn TaggerOracle>,
    policy: &OperationPolicy,
    config: &RoundConfig,
    seed: u64,
    round: u32,
) -> Result<RoundOutput, FilterError> {
    let pools = generate_pools(en_data, target, backend, policy, config)?;
    filter_pools(pools, oracle, config, seed, round)
}
