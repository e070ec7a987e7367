//! One function per subcommand. Every stage reads the previous stage's
//! artifacts from the output directory and writes its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use slotloc_core::corpus::{read_dataset, write_dataset};
use slotloc_core::evaluation::{emit_report, evaluate_oracle, success_report, EvalResult, ReportFormat};
use slotloc_core::filtering::{
    filter_pools, generate_pools, stats_from_tsv, stats_to_tsv, PromptPool, RemoteOracle, RoundConfig,
};
use slotloc_core::generation::{MockBackend, MockLexicon, RemoteBackend};
use slotloc_core::ifm::{
    ifm_run, resume, write_checkpoint, BaselineTagger, BaselineTrainer, FixedTrainer, IfmConfig, IfmState,
    TaggerTrainer,
};
use slotloc_core::prompt::{build_prompt, extract_training_pairs, pair_parallel, serialize_prompt, PromptError};
use slotloc_core::{Dataset, DatasetFormat, GeneratorBackend, OperationPolicy, TaggerOracle};

use crate::config::{invalid, BackendKind, Config, ConfigError, OracleKind};
use crate::{EvaluateArgs, ExtractArgs, IfmArgs, IngestArgs, ReportArgs};

fn format_of(path: &Path, explicit: Option<&str>) -> Result<DatasetFormat> {
    match explicit {
        Some(f) => Ok(f.parse().map_err(ConfigError)?),
        None => Ok(DatasetFormat::from_extension(path).ok_or_else(|| {
            ConfigError(format!(
                "cannot infer the format of {}; pass it explicitly",
                path.display()
            ))
        })?),
    }
}

fn load_dataset(path: &Path, format: Option<&str>) -> Result<Dataset> {
    let format = format_of(path, format)?;
    read_dataset(path, format, None).with_context(|| path.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e} (has the previous stage run?)", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ConfigError(format!("{}:{}: {e}", path.display(), i + 1)).into())
        })
        .collect()
}

fn stage_dir(cfg: &Config, stage: &str) -> PathBuf {
    cfg.paths.output.join(stage)
}

fn read_train(cfg: &Config) -> Result<Dataset> {
    let path = cfg.train_path()?;
    let d = read_dataset(path, cfg.train_format()?, None).with_context(|| path.display().to_string())?;
    if let Some(u) = d.iter().find(|u| !u.is_english()) {
        return Err(PromptError::NonEnglishSource(u.language.clone()))
            .with_context(|| format!("{} must hold English records only", path.display()));
    }
    if d.is_empty() {
        invalid!("{} holds no records", path.display());
    }
    Ok(d)
}

fn policy(cfg: &Config) -> Result<OperationPolicy> {
    match &cfg.paths.policy {
        Some(p) => OperationPolicy::load(p).with_context(|| p.display().to_string()),
        None => Ok(OperationPolicy::matis()),
    }
}

fn round_config(cfg: &Config) -> RoundConfig {
    RoundConfig {
        sampling: cfg.sampling.clone(),
        selection: cfg.pipeline.selection,
        default_domain: cfg.pipeline.default_domain.clone(),
        jobs: cfg.jobs(),
    }
}

fn backend(cfg: &Config) -> Result<Box<dyn GeneratorBackend>> {
    let spec = &cfg.backend;
    Ok(match spec.kind {
        BackendKind::Mock => {
            let path = spec.lexicon.as_deref().expect("validated");
            let mut lexicon = MockLexicon::load(path)?;
            // The run seed governs mock sampling too.
            lexicon.seed = cfg.seeds.base_seed;
            Box::new(MockBackend::new(lexicon))
        }
        BackendKind::Remote => Box::new(RemoteBackend::new(
            spec.url.clone().expect("validated"),
            spec.retry.clone(),
            spec.max_concurrency,
        )),
    })
}

/// The tagger used by the intent filter in round 0.
fn round0_oracle(cfg: &Config, train: &Dataset) -> Result<Option<Arc<dyn TaggerOracle>>> {
    Ok(match cfg.oracle.kind {
        OracleKind::None => None,
        OracleKind::Remote => Some(Arc::new(RemoteOracle::new(
            cfg.oracle.url.clone().expect("validated"),
            cfg.oracle.retry.clone(),
        ))),
        OracleKind::Baseline => {
            let mut data = train.clone();
            for p in &cfg.paths.oracle_train {
                data = data.concat(load_dataset(p, None)?);
            }
            Some(Arc::new(BaselineTagger::train(&data, &cfg.oracle.baseline)))
        }
    })
}

fn pairs_file(input: &Path, locale: &str, domain: &str, output: &Path) -> Result<usize> {
    let d = read_dataset(input, DatasetFormat::MassiveParallel, None).with_context(|| input.display().to_string())?;
    let pairs = pair_parallel(&d, locale).with_context(|| input.display().to_string())?;
    let training = extract_training_pairs(&pairs, domain).with_context(|| input.display().to_string())?;
    write_jsonl(output, &training)?;
    Ok(training.len())
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let d = load_dataset(&args.input, args.input_format.as_deref())?;
    log::info!("{}: {} valid records", args.input.display(), d.len());
    if let Some(out) = &args.output {
        let format = format_of(out, args.output_format.as_deref())?;
        write_dataset(out, &d, format).with_context(|| out.display().to_string())?;
        log::info!("wrote {} ({format})", out.display());
    }
    Ok(())
}

pub fn extract_prompts(cfg: &Config, args: &ExtractArgs) -> Result<()> {
    if let Some(input) = &args.parallel {
        let locale = args.locale.as_deref().expect("required by clap");
        let out = args
            .output
            .clone()
            .unwrap_or_else(|| stage_dir(cfg, "pairs").join(format!("{locale}.jsonl")));
        let n = pairs_file(input, locale, &cfg.pipeline.default_domain, &out)?;
        log::info!("wrote {n} prompt/target pairs to {}", out.display());
        return Ok(());
    }
    let train = read_train(cfg)?;
    let policy = policy(cfg)?;
    let dir = args.output.clone().unwrap_or_else(|| stage_dir(cfg, "prompts"));
    for lang in cfg.languages()? {
        let mut text = String::new();
        for u in train.iter() {
            let domain = u.domain.as_deref().unwrap_or(&cfg.pipeline.default_domain);
            let prompt = build_prompt(u, &lang, domain, &policy)?;
            text.push_str(&serialize_prompt(&prompt));
            text.push('\n');
        }
        let path = dir.join(format!("{}.txt", lang.code));
        write_text(&path, &text)?;
        log::info!("wrote {} prompts to {}", train.len(), path.display());
    }
    Ok(())
}

pub fn generate(cfg: &Config) -> Result<()> {
    cfg.validate()?;
    let train = read_train(cfg)?;
    let policy = policy(cfg)?;
    let backend = backend(cfg)?;
    let rc = round_config(cfg);
    for lang in cfg.languages()? {
        let pools = generate_pools(&train, &lang, backend.as_ref(), &policy, &rc)
            .with_context(|| format!("generating {}", lang.code))?;
        let failed = pools.iter().filter(|p| p.error.is_some()).count();
        if failed > 0 {
            log::warn!("{}: {failed} of {} prompts failed", lang.code, pools.len());
        }
        let path = stage_dir(cfg, "generate").join(format!("{}.jsonl", lang.code));
        write_jsonl(&path, &pools)?;
        log::info!("{}: {} pools written to {}", lang.code, pools.len(), path.display());
    }
    Ok(())
}

pub fn filter(cfg: &Config) -> Result<()> {
    cfg.validate()?;
    let train = read_train(cfg)?;
    let oracle = round0_oracle(cfg, &train)?;
    let rc = round_config(cfg);
    let dir = stage_dir(cfg, "filter");
    let mut rows = Vec::new();
    for lang in cfg.languages()? {
        let pools: Vec<PromptPool> = read_jsonl(&stage_dir(cfg, "generate").join(format!("{}.jsonl", lang.code)))?;
        let out = filter_pools(pools, oracle.as_deref(), &rc, cfg.seeds.base_seed, 0)
            .with_context(|| format!("filtering {}", lang.code))?;
        log::info!("{}: {}", lang.code, out.stats);
        let path = dir.join(format!("{}.bracket", lang.code));
        write_dataset(&path, &out.dataset, DatasetFormat::BracketLines).with_context(|| path.display().to_string())?;
        write_jsonl(&dir.join(format!("{}.pools.jsonl", lang.code)), &out.pools)?;
        write_jsonl(&dir.join(format!("{}.selections.jsonl", lang.code)), &out.outcomes)?;
        rows.push((lang.code, out.stats));
    }
    write_text(&dir.join("stats.tsv"), &stats_to_tsv(&rows))
}

fn heldout(cfg: &Config, train: &Dataset) -> Result<Dataset> {
    let mut parts = Vec::new();
    for lang in cfg.languages()? {
        match cfg.paths.validation.get(&lang.code) {
            Some(p) => parts.push(load_dataset(p, None)?),
            None => log::warn!("no validation set for {}", lang.code),
        }
    }
    if parts.is_empty() {
        log::warn!("no validation sets; scoring rounds on the English training data");
        return Ok(train.clone());
    }
    let mut d = Dataset::new(Vec::new(), "validation");
    for p in parts {
        d = d.concat(p);
    }
    Ok(d)
}

fn remove_checkpoints(dir: &Path) -> Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("round-") && name.ends_with(".jsonl") {
            fs::remove_file(&path).with_context(|| path.display().to_string())?;
        }
    }
    Ok(())
}

const HISTORY_HEADER: &str =
    "round\tlang\tic_accuracy\tslot_f1\tfell_back\tprompts\tcandidates\tparse_pass\tsurviving\tgenerated\tcopied";

pub fn ifm(cfg: &Config, args: &IfmArgs) -> Result<()> {
    cfg.validate()?;
    let trainer: Box<dyn TaggerTrainer> = match cfg.oracle.kind {
        OracleKind::None => invalid!("ifm needs a tagger; oracle.kind is \"none\""),
        OracleKind::Baseline => Box::new(BaselineTrainer::new(cfg.oracle.baseline.clone())),
        OracleKind::Remote => Box::new(FixedTrainer(Arc::new(RemoteOracle::new(
            cfg.oracle.url.clone().expect("validated"),
            cfg.oracle.retry.clone(),
        )))),
    };
    let train = read_train(cfg)?;
    let mut pools = BTreeMap::new();
    for lang in cfg.languages()? {
        let path = stage_dir(cfg, "filter").join(format!("{}.pools.jsonl", lang.code));
        pools.insert(lang.code, read_jsonl::<PromptPool>(&path)?);
    }
    let state = IfmState::initial(pools, cfg.seeds.base_seed);
    let ckpt = cfg.checkpoint_dir();
    let state = if args.resume {
        let s = resume(state, &ckpt)?;
        log::info!("resuming after round {}", s.round);
        s
    } else {
        remove_checkpoints(&ckpt)?;
        state
    };
    let heldout = heldout(cfg, &train)?;
    let config = IfmConfig {
        policy: cfg.ifm,
        base_seed: cfg.seeds.base_seed,
        jobs: cfg.jobs(),
    };
    let out = ifm_run(&train, state, trainer.as_ref(), &heldout, &config, &mut |s| {
        let path = write_checkpoint(&ckpt, s)?;
        if let Some(r) = s.history.last() {
            log::info!(
                "round {}: ic {:.4} slot f1 {:.4}; checkpoint {}",
                r.round,
                r.metrics.ic_accuracy,
                r.metrics.slot_f1,
                path.display()
            );
        }
        Ok(())
    })?;
    let dir = stage_dir(cfg, "ifm");
    for (lang, d) in out.datasets() {
        let path = dir.join(format!("{lang}.bracket"));
        write_dataset(&path, &d, DatasetFormat::BracketLines).with_context(|| path.display().to_string())?;
    }
    let mut history = format!("{HISTORY_HEADER}\n");
    for r in &out.history {
        for (lang, s) in &r.stats {
            history.push_str(&format!(
                "{}\t{lang}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.round,
                r.metrics.ic_accuracy,
                r.metrics.slot_f1,
                r.fell_back,
                s.prompts,
                s.candidates,
                s.parse_pass,
                s.ic_pass,
                s.selected_generated,
                s.backed_off
            ));
        }
    }
    let rows: Vec<_> = out.stats().into_iter().collect();
    write_text(&dir.join("stats.tsv"), &stats_to_tsv(&rows))?;
    write_text(&dir.join("history.tsv"), &history)
}

fn write_scores(path: &Path, scores: &BTreeMap<String, EvalResult>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scores)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn evaluate(cfg: &Config, args: &EvaluateArgs) -> Result<()> {
    let train = read_train(cfg)?;
    let languages = cfg.languages()?;
    let mut gold = BTreeMap::new();
    for lang in &languages {
        match cfg.paths.validation.get(&lang.code) {
            Some(p) => {
                gold.insert(lang.code.clone(), load_dataset(p, None)?);
            }
            None => log::warn!("no validation set for {}; skipped", lang.code),
        }
    }
    if gold.is_empty() {
        invalid!("evaluate needs paths.validation for at least one language");
    }
    let stages: Vec<String> = if args.stage.is_empty() {
        ["filter", "ifm"]
            .into_iter()
            .filter(|s| stage_dir(cfg, s).is_dir())
            .map(String::from)
            .collect()
    } else {
        args.stage.clone()
    };
    let dir = stage_dir(cfg, "evaluate");
    let english = BaselineTagger::train(&train, &cfg.oracle.baseline);
    let mut scores = BTreeMap::new();
    for (code, g) in &gold {
        scores.insert(code.clone(), evaluate_oracle(&english, g)?);
    }
    write_scores(&dir.join("english.json"), &scores)?;
    for stage in &stages {
        let mut scores = BTreeMap::new();
        for (code, g) in &gold {
            let path = stage_dir(cfg, stage).join(format!("{code}.bracket"));
            if !path.exists() {
                invalid!("{} is missing (has the {stage} stage run?)", path.display());
            }
            let synthetic = load_dataset(&path, Some("bracket-lines"))?;
            let tagger = BaselineTagger::train(&train.clone().concat(synthetic), &cfg.oracle.baseline);
            let r = evaluate_oracle(&tagger, g)?;
            log::info!("{stage} {code}: ic {:.4} slot f1 {:.4}", r.ic_accuracy, r.slot_f1);
            scores.insert(code.clone(), r);
        }
        write_scores(&dir.join(format!("{stage}.json")), &scores)?;
    }
    Ok(())
}

fn stats_spec<'a>(cfg: &'a Config, spec: &'a str) -> (&'a str, PathBuf) {
    match spec.split_once('=') {
        Some((method, path)) if !method.is_empty() && !method.contains(['/', '\\']) => (method, PathBuf::from(path)),
        _ => (cfg.pipeline.method.as_str(), PathBuf::from(spec)),
    }
}

pub fn report(cfg: &Config, args: &ReportArgs) -> Result<()> {
    let default = stage_dir(cfg, "filter").join("stats.tsv").display().to_string();
    let specs: Vec<&str> = if args.stats.is_empty() {
        vec![default.as_str()]
    } else {
        args.stats.iter().map(String::as_str).collect()
    };
    let mut reports = Vec::new();
    for spec in specs {
        let (method, path) = stats_spec(cfg, spec);
        let text = fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let rows = stats_from_tsv(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        for (lang, stats) in rows {
            reports.push(success_report(&stats, &lang, method).with_context(|| path.display().to_string())?);
        }
    }
    let formats: Vec<ReportFormat> = if args.format.is_empty() {
        vec![ReportFormat::Tsv, ReportFormat::Markdown, ReportFormat::Jsonl]
    } else {
        args.format
            .iter()
            .map(|f| f.parse().map_err(ConfigError))
            .collect::<Result<_, _>>()?
    };
    for format in formats {
        let path = cfg.paths.output.join(format!("report.{}", format.extension()));
        write_text(&path, &emit_report(&reports, format))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
