//! Iterative filtering: retrain a tagger on English plus the current
//! selections, drop pool members the tagger disagrees with, re-select with a
//! round-specific seed, and stop on plateau.

mod baseline;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedUtterance, Dataset};
use crate::evaluation::{evaluate_oracle, EvalError, EvalResult};
use crate::filtering::{
    select_random, with_workers, Hypothesis, OracleError, PromptPool, SelectionOutcome, StageStats, TaggerOracle,
};
use crate::generation::Stage;
use crate::prompt::GenerationPrompt;

pub use baseline::{BaselineConfig, BaselineTagger, BaselineTrainer};

/// Produces a tagger from training data. Must be deterministic.
pub trait TaggerTrainer: Send + Sync {
    fn train(&self, data: &Dataset) -> Result<Arc<dyn TaggerOracle>, OracleError>;
}

/// Hands out the same oracle every round, e.g. a remote tagger that is
/// trained elsewhere.
pub struct FixedTrainer(pub Arc<dyn TaggerOracle>);

impl TaggerTrainer for FixedTrainer {
    fn train(&self, _: &Dataset) -> Result<Arc<dyn TaggerOracle>, OracleError> {
        Ok(self.0.clone())
    }
}

/// The hypothesis matches the prompted intent and labels, and every
/// hypothesized span covers the same tokens as the parsed span holding the
/// same label occurrence.
pub fn agreement(hyp: &Hypothesis, prompt: &GenerationPrompt, parsed: &AnnotatedUtterance) -> bool {
    if hyp.intent != prompt.intent {
        return false;
    }
    let mut prompted: Vec<&str> = prompt.instructions.iter().map(|i| i.label.as_str()).collect();
    let mut hyp_labels: Vec<&str> = hyp.spans.iter().map(|s| s.label.as_str()).collect();
    prompted.sort_unstable();
    hyp_labels.sort_unstable();
    if prompted != hyp_labels {
        return false;
    }
    ranges_by_label(&hyp.spans) == ranges_by_label(&parsed.slots)
}

fn ranges_by_label(spans: &[crate::SlotSpan]) -> BTreeMap<&str, Vec<(usize, usize)>> {
    let mut m: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for s in spans {
        m.entry(s.label.as_str()).or_default().push((s.start, s.end));
    }
    m.values_mut().for_each(|v| v.sort_unstable());
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateauPolicy {
    pub max_rounds: u32,
    /// Stop once neither held-out metric improves by more than this.
    pub min_delta: f64,
}

impl Default for PlateauPolicy {
    fn default() -> Self {
        PlateauPolicy {
            max_rounds: 2,
            min_delta: 0.0,
        }
    }
}

impl PlateauPolicy {
    pub fn validate(&self) -> Result<(), IfmError> {
        if self.max_rounds == 0 {
            return Err(IfmError::Config("max_rounds must be at least 1".into()));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(IfmError::Config(format!("min_delta {} must be >= 0", self.min_delta)));
        }
        Ok(())
    }

    fn improved(&self, prev: &EvalResult, cur: &EvalResult) -> bool {
        cur.ic_accuracy - prev.ic_accuracy > self.min_delta || cur.slot_f1 - prev.slot_f1 > self.min_delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Held-out scores of the oracle trained for this round.
    pub metrics: EvalResult,
    pub stats: BTreeMap<String, StageStats>,
    /// Every pool emptied; the previous selections were kept.
    #[serde(default)]
    pub fell_back: bool,
}

#[derive(Debug, Error)]
pub enum IfmError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Checkpoint {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfmState {
    pub round: u32,
    /// Per language, in prompt order.
    pub pools: BTreeMap<String, Vec<PromptPool>>,
    pub selections: BTreeMap<String, Vec<SelectionOutcome>>,
    pub history: Vec<RoundRecord>,
}

fn select_or_backoff(pool: &PromptPool, seed: u64, round: u32) -> SelectionOutcome {
    match select_random(&pool.candidates, seed, round) {
        Ok(i) => SelectionOutcome::Generated {
            utterance: pool.parse(i).expect("survivor parses"),
            candidate_index: i,
        },
        Err(_) => SelectionOutcome::BackoffEnglish {
            original: pool.source.clone(),
        },
    }
}

fn round_stats(pools: &[PromptPool], selections: &[SelectionOutcome]) -> StageStats {
    let mut s = StageStats::default();
    for (p, o) in pools.iter().zip(selections) {
        s.prompts += 1;
        s.candidates += p.candidates.len();
        s.parse_pass += p.candidates.passed(Stage::Heuristic);
        s.ic_pass += p.candidates.survivors().len();
        if o.is_generated() {
            s.selected_generated += 1;
        } else {
            s.backed_off += 1;
        }
        s.errors += p.error.is_some() as usize;
    }
    s
}

impl IfmState {
    /// Round 0: a seeded random draw from each filtered pool.
    pub fn initial(pools: BTreeMap<String, Vec<PromptPool>>, base_seed: u64) -> Self {
        let selections = pools
            .iter()
            .map(|(lang, ps)| {
                (
                    lang.clone(),
                    ps.iter().map(|p| select_or_backoff(p, base_seed, 0)).collect(),
                )
            })
            .collect();
        IfmState {
            round: 0,
            pools,
            selections,
            history: Vec::new(),
        }
    }

    /// Selected (or copied) records per language.
    pub fn datasets(&self) -> BTreeMap<String, Dataset> {
        self.selections
            .iter()
            .map(|(lang, sel)| {
                let records = sel.iter().map(|o| o.utterance().clone()).collect();
                (
                    lang.clone(),
                    Dataset::new(records, format!("{lang} ifm round {}", self.round)),
                )
            })
            .collect()
    }

    pub fn stats(&self) -> BTreeMap<String, StageStats> {
        self.pools
            .iter()
            .map(|(lang, ps)| (lang.clone(), round_stats(ps, &self.selections[lang])))
            .collect()
    }

    fn training_set(&self, en: &Dataset) -> Dataset {
        let mut records = en.records.clone();
        for sel in self.selections.values() {
            records.extend(sel.iter().filter(|o| o.is_generated()).map(|o| o.utterance().clone()));
        }
        Dataset::new(records, "ifm training")
    }

    fn survivor_count(&self) -> usize {
        self.pools
            .values()
            .flatten()
            .map(|p| p.candidates.survivors().len())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfmConfig {
    pub policy: PlateauPolicy,
    pub base_seed: u64,
    pub jobs: usize,
}

impl Default for IfmConfig {
    fn default() -> Self {
        IfmConfig {
            policy: PlateauPolicy::default(),
            base_seed: 0,
            jobs: 1,
        }
    }
}

fn refilter(pool: &mut PromptPool, oracle: &dyn TaggerOracle, round: u32) -> Result<(), OracleError> {
    let survivors = pool.candidates.survivors();
    let mut parsed = Vec::with_capacity(survivors.len());
    for &i in &survivors {
        parsed.push(pool.parse(i));
    }
    let texts: Vec<String> = parsed.iter().flatten().map(|u| u.text()).collect();
    let hyps = oracle.tag_batch(&texts, &pool.prompt.target_language.code)?;
    let mut hyps = hyps.into_iter();
    for (i, u) in survivors.into_iter().zip(parsed) {
        let pass = match u {
            Some(u) => {
                let h = hyps
                    .next()
                    .ok_or_else(|| OracleError::Protocol("too few hypotheses".into()))?;
                agreement(&h, &pool.prompt, &u)
            }
            None => false,
        };
        pool.candidates.record(i, Stage::Agreement(round), pass);
    }
    Ok(())
}

/// Runs rounds `state.round + 1 ..= max_rounds`, calling `on_round` after
/// each one (e.g. to write a checkpoint).
pub fn ifm_run(
    en: &Dataset,
    mut state: IfmState,
    trainer: &dyn TaggerTrainer,
    heldout: &Dataset,
    config: &IfmConfig,
    on_round: &mut dyn FnMut(&IfmState) -> Result<(), IfmError>,
) -> Result<IfmState, IfmError> {
    config.policy.validate()?;
    while state.round < config.policy.max_rounds {
        if let [.., prev, last] = state.history.as_slice() {
            if !config.policy.improved(&prev.metrics, &last.metrics) {
                log::info!("plateau after round {}", state.round);
                break;
            }
        }
        if state.history.last().is_some_and(|h| h.fell_back) {
            break;
        }
        let round = state.round + 1;
        let oracle = trainer.train(&state.training_set(en))?;
        let metrics = evaluate_oracle(oracle.as_ref(), heldout)?;
        log::info!(
            "round {round}: held-out ic_accuracy {:.4} slot_f1 {:.4}",
            metrics.ic_accuracy,
            metrics.slot_f1
        );
        let before = state.clone();
        let survivors_before = state.survivor_count();
        let seed = config.base_seed;
        let oracle = oracle.as_ref();
        for (lang, pools) in state.pools.iter_mut() {
            let sel: Result<Vec<SelectionOutcome>, OracleError> = with_workers(config.jobs, || {
                pools
                    .par_iter_mut()
                    .map(|p| {
                        refilter(p, oracle, round)?;
                        Ok(select_or_backoff(p, seed, round))
                    })
                    .collect()
            });
            state.selections.insert(lang.clone(), sel?);
        }
        let fell_back = survivors_before > 0 && state.survivor_count() == 0;
        if fell_back {
            log::warn!(
                "round {round}: every pool emptied, keeping round {} selections",
                before.round
            );
            state.pools = before.pools;
            state.selections = before.selections;
        }
        state.round = round;
        state.history.push(RoundRecord {
            round,
            metrics,
            stats: state.stats(),
            fell_back,
        });
        on_round(&state)?;
    }
    Ok(state)
}

/// One prompt's line in a round checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub prompt_id: String,
    pub surviving: Vec<usize>,
    pub selection: SelectionOutcome,
}

pub fn checkpoint_path(dir: &Path, round: u32) -> PathBuf {
    dir.join(format!("round-{round}.jsonl"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IfmError + '_ {
    move |source| IfmError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `round-<r>.jsonl`: a round record line, then one line per prompt
/// (languages in order).
pub fn write_checkpoint(dir: &Path, state: &IfmState) -> Result<PathBuf, IfmError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = checkpoint_path(dir, state.round);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let header = state
        .history
        .last()
        .ok_or_else(|| IfmError::Config("no completed round to checkpoint".into()))?;
    writeln!(w, "{}", json_line(header)).map_err(io_err(&path))?;
    for (lang, pools) in &state.pools {
        for (p, sel) in pools.iter().zip(&state.selections[lang]) {
            let rec = CheckpointRecord {
                prompt_id: p.prompt_id.clone(),
                surviving: p.candidates.survivors(),
                selection: sel.clone(),
            };
            writeln!(w, "{}", json_line(&rec)).map_err(io_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn json_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("checkpoint record serializes")
}

pub fn read_checkpoint(path: &Path) -> Result<(RoundRecord, Vec<CheckpointRecord>), IfmError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, e: serde_json::Error| IfmError::Checkpoint {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| IfmError::Checkpoint {
        path: path.to_path_buf(),
        line: 1,
        message: "empty checkpoint".into(),
    })?;
    let header: RoundRecord = serde_json::from_str(first).map_err(|e| bad(1, e))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(i + 1, e)))
        .collect::<Result<_, _>>()?;
    Ok((header, records))
}

/// Replays checkpoints `round-1 ..= round-k` found in `dir` onto a round-0
/// state. Returns the state after the last checkpoint present.
pub fn resume(mut state: IfmState, dir: &Path) -> Result<IfmState, IfmError> {
    let mut ids: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (lang, pools) in &state.pools {
        for (i, p) in pools.iter().enumerate() {
            ids.insert(p.prompt_id.clone(), (lang.clone(), i));
        }
    }
    loop {
        let round = state.round + 1;
        let path = checkpoint_path(dir, round);
        if !path.exists() {
            break;
        }
        let (header, records) = read_checkpoint(&path)?;
        for (line, rec) in records.into_iter().enumerate() {
            let (lang, i) = ids.get(&rec.prompt_id).ok_or_else(|| IfmError::Checkpoint {
                path: path.clone(),
                line: line + 2,
                message: format!("unknown prompt {}", rec.prompt_id),
            })?;
            let pool = &mut state.pools.get_mut(lang).expect("indexed")[*i];
            for c in pool.candidates.survivors() {
                pool.candidates
                    .record(c, Stage::Agreement(round), rec.surviving.contains(&c));
            }
            state.selections.get_mut(lang).expect("indexed")[*i] = rec.selection;
        }
        state.round = round;
        state.history.push(header);
        log::info!("resumed round {round} from {}", path.display());
    }
    Ok(state)
}
