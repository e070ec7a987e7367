//! Acceptance checks. Runs without the test harness and prints one
//! PASS/FAIL line per criterion.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};

use slotloc_core::bracket::{parse_brackets, parse_brackets_with, serialize_brackets, validate, IndexLabels};
use slotloc_core::evaluation::{
    emit_report, ic_accuracy, round2, slot_f1, success_report, with_averages, ReportFormat, SuccessRateReport,
};
use slotloc_core::filtering::{heuristic_filter, run_round, PromptPool, RoundConfig};
use slotloc_core::generation::{mock_generate, CandidateSet, MockBackend, NoiseRates, Stage};
use slotloc_core::ifm::{
    checkpoint_path, ifm_run, write_checkpoint, BaselineTagger, BaselineTrainer, IfmConfig, IfmState,
};
use slotloc_core::prompt::{build_prompt, serialize_prompt};
use slotloc_core::{
    synthetic, AnnotatedUtterance, OperationPolicy, SamplingConfig, SelectionOutcome, SlotOperation, SlotSpan,
    StageStats, TargetLanguage, ValidationMode,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn toks(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_string).collect()
}

fn canonical(s: &str) -> String {
    s.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

const TICKET_PROMPT: &str = "<language> German </language>
<domain> travelinfo </domain>
<intent> flight </intent>
<include>
 [1 translation( first class ) ] ,  [2 localization( united airlines ) ] ,  [3 localization( denver ) ] ,  [4 localization( baltimore ) ] ,  [5 translation( december seventeenth ) ]
</include>
<labels>
 [1=fare_class , [2=airline ,  [3=fromloc.city_name ,  [4=toloc.city_name , [5=date
</labels>
<examples>
i need a [1 first class ] ticket  on [2 united airlines ]  from [3 denver ]  to [4 baltimore ]  scheduled for [5 december seventeenth ]
</examples>";

fn prompt_fidelity() -> Check {
    let ticket = AnnotatedUtterance::new(
        toks("i need a first class ticket on united airlines from denver to baltimore scheduled for december seventeenth"),
        "flight",
        "en",
        vec![
            SlotSpan::new(3, 4, "fare_class"),
            SlotSpan::new(7, 8, "airline"),
            SlotSpan::new(10, 10, "fromloc.city_name"),
            SlotSpan::new(12, 12, "toloc.city_name"),
            SlotSpan::new(15, 16, "date"),
        ],
    )
    .map_err(|e| e.to_string())?;
    let de = TargetLanguage::from_code("de").unwrap();
    let p = build_prompt(&ticket, &de, "travelinfo", &OperationPolicy::matis()).map_err(|e| e.to_string())?;
    let got = serialize_prompt(&p);
    if got != canonical(TICKET_PROMPT) {
        return Err(format!("ticket prompt differs:\n{got}"));
    }

    let u = AnnotatedUtterance::new(
        toks("i need a flight from pittsburgh to new york leaving at 5 pm"),
        "flight",
        "en",
        vec![
            SlotSpan::new(5, 5, "fromloc.city_name"),
            SlotSpan::new(7, 8, "toloc.city_name"),
            SlotSpan::new(11, 12, "depart_time.time"),
        ],
    )
    .map_err(|e| e.to_string())?;
    let es = TargetLanguage::from_code("es").unwrap();
    let local = OperationPolicy::matis();
    let literal = OperationPolicy::matis()
        .with("fromloc.city_name", SlotOperation::Translation)
        .with("toloc.city_name", SlotOperation::Translation);
    let a = serialize_prompt(&build_prompt(&u, &es, "travelinfo", &literal).map_err(|e| e.to_string())?);
    let b = serialize_prompt(&build_prompt(&u, &es, "travelinfo", &local).map_err(|e| e.to_string())?);
    let (ta, tb): (Vec<&str>, Vec<&str>) = (a.split(' ').collect(), b.split(' ').collect());
    if ta.len() != tb.len() {
        return Err("operation pair differs in length".into());
    }
    let diffs: Vec<(&str, &str)> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, y)| (*x, *y))
        .collect();
    if diffs.len() != 2 || diffs.iter().any(|d| *d != ("translation(", "localization(")) {
        return Err(format!("operation pair differs by {diffs:?}"));
    }
    if !a.contains("[3 translation( 5 pm ) ]") || !b.contains("[3 translation( 5 pm ) ]") {
        return Err("time slot should stay translation".into());
    }
    Ok("ticket prompt byte-exact; operation pair differs in 2 operation tokens".into())
}

const LABELS: &[&str] = &["fromloc.city_name", "toloc.city_name", "airline_name", "date", "b-x"];

fn tagged() -> impl Strategy<Value = (Vec<String>, Vec<SlotSpan>, Vec<u32>)> {
    prop::collection::vec(("[a-z0-9äéñ.,'-]{1,6}", 0u8..3, prop::sample::select(LABELS)), 1..14).prop_flat_map(|toks| {
        let mut tokens = Vec::new();
        let mut spans: Vec<SlotSpan> = Vec::new();
        let mut open = false;
        for (i, (t, kind, label)) in toks.into_iter().enumerate() {
            tokens.push(t);
            match kind {
                1 => {
                    spans.push(SlotSpan::new(i, i, label));
                    open = true;
                }
                2 if open => spans.last_mut().unwrap().end = i,
                _ => open = false,
            }
        }
        let n = spans.len();
        let pool: Vec<u32> = (1..=(n as u32 + 4)).collect();
        (
            Just(tokens),
            Just(spans),
            prop::sample::subsequence(pool, n).prop_shuffle(),
        )
    })
}

fn bracket_grammar() -> Check {
    let mut round_trips = runner(10_000);
    round_trips
        .run(&tagged(), |(tokens, spans, map)| {
            let (s, labels) = serialize_brackets(&tokens, &spans, &map).unwrap();
            let parse = parse_brackets(s.as_str(), &labels).unwrap();
            prop_assert_eq!(parse.tokens, tokens);
            prop_assert_eq!(parse.slots, spans);
            prop_assert_eq!(parse.indices, map);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;
    let texts = prop_oneof![any::<String>(), "[\\[\\]( )0-9a-z=]{0,40}"];
    let mut arbitrary = runner(10_000);
    arbitrary
        .run(&(texts, 0u32..4), |(s, k)| {
            let labels: IndexLabels = (1..=k).map(|i| (i, format!("l{i}"))).collect();
            for mode in [ValidationMode::Exact, ValidationMode::Subset] {
                let outcome = panic::catch_unwind(|| {
                    (
                        validate(&s, &labels, mode).ok(),
                        parse_brackets_with(&s, &labels, mode).is_ok(),
                    )
                });
                prop_assert!(outcome.is_ok(), "parser panicked on {:?}", s);
                let (valid, parsed) = outcome.unwrap();
                prop_assert_eq!(valid, parsed);
            }
            Ok(())
        })
        .map_err(|e| format!("arbitrary input: {e}"))?;
    Ok("10000 round trips, 10000 arbitrary inputs".into())
}

/// Method, language, parse %, IC %, final %, generated, copied, total.
type Row = (&'static str, &'static str, f64, f64, f64, usize, usize, usize);

const SUCCESS_TABLE: &[Row] = &[
    ("linguist", "DE", 91.61, 78.76, 72.15, 3037, 1172, 4209),
    ("linguist", "ES", 91.59, 80.54, 73.77, 3105, 1104, 4209),
    ("linguist", "FR", 92.47, 73.79, 68.23, 2872, 1337, 4209),
    ("linguist", "HI", 89.69, 79.00, 70.85, 2982, 1227, 4209),
    ("linguist", "JA", 72.18, 76.88, 55.49, 2336, 1873, 4209),
    ("linguist", "PT", 92.33, 83.30, 76.91, 3237, 972, 4209),
    ("localized", "DE", 99.44, 90.78, 90.27, 4052, 436, 4488),
    ("localized", "ES", 99.44, 94.25, 93.72, 4206, 282, 4488),
    ("localized", "FR", 99.84, 94.14, 93.99, 4218, 270, 4488),
    ("localized", "HI", 97.82, 85.16, 83.30, 3739, 749, 4488),
    ("localized", "JA", 95.10, 79.48, 75.58, 3392, 1096, 4488),
    ("localized", "PT", 99.31, 92.74, 92.10, 4133, 355, 4488),
    ("all-translate", "DE", 99.35, 91.35, 90.76, 4073, 415, 4488),
    ("all-translate", "ES", 98.93, 94.01, 93.00, 4174, 314, 4488),
    ("all-translate", "FR", 99.64, 94.43, 94.09, 4223, 265, 4488),
    ("all-translate", "HI", 97.08, 85.76, 83.26, 3737, 751, 4488),
    ("all-translate", "JA", 94.45, 82.66, 78.07, 3504, 984, 4488),
    ("all-translate", "PT", 98.95, 92.96, 91.99, 4128, 360, 4488),
];

const SUCCESS_AVG: &[Row] = &[
    ("linguist", "AVG", 88.31, 78.71, 69.57, 2928, 1281, 4209),
    ("localized", "AVG", 98.49, 89.43, 88.16, 3957, 531, 4488),
    ("all-translate", "AVG", 98.07, 90.20, 88.53, 3973, 515, 4488),
];

/// Eight candidates per prompt; pass counts rounded from the printed rates.
fn counts_for(row: &Row) -> StageStats {
    let &(_, _, parse, ic, _, generated, copied, total) = row;
    let candidates = 8 * total;
    let parse_pass = (parse * candidates as f64 / 100.0).round() as usize;
    let ic_pass = (ic * parse_pass as f64 / 100.0).round() as usize;
    StageStats {
        prompts: total,
        candidates,
        parse_pass,
        ic_pass,
        selected_generated: generated,
        backed_off: copied,
        errors: 0,
    }
}

fn matches_row(r: &SuccessRateReport, want: &Row) -> Result<(), String> {
    let &(method, lang, parse, ic, fin, generated, copied, total) = want;
    let got = [r.parse_success, r.ic_filter_success, r.final_success];
    for (g, w) in got.iter().zip([parse, ic, fin]) {
        if (round2(*g) - w).abs() > 0.01 + 1e-9 {
            return Err(format!("{method} {lang}: {g:.4} vs {w}"));
        }
    }
    if (r.generated, r.copied, r.total) != (generated, copied, total) {
        return Err(format!(
            "{method} {lang}: counts {}/{}/{}",
            r.generated, r.copied, r.total
        ));
    }
    Ok(())
}

fn success_rates() -> Check {
    let mut reports = Vec::new();
    for row in SUCCESS_TABLE {
        let r = success_report(&counts_for(row), row.1, row.0).map_err(|e| e.to_string())?;
        matches_row(&r, row)?;
        let composed = r.parse_success * r.ic_filter_success / 100.0;
        if (composed - r.final_success).abs() > 0.02 {
            return Err(format!(
                "{} {}: parse x IC {composed:.4} vs final {:.4}",
                row.0, row.1, r.final_success
            ));
        }
        if r.generated + r.copied != r.total {
            return Err(format!("{} {}: generated + copied != total", row.0, row.1));
        }
        reports.push(r);
    }
    let all = with_averages(&reports);
    let avgs: Vec<&SuccessRateReport> = all.iter().filter(|r| r.language == "AVG").collect();
    if avgs.len() != SUCCESS_AVG.len() {
        return Err(format!("{} AVG rows", avgs.len()));
    }
    for (r, want) in avgs.iter().zip(SUCCESS_AVG) {
        matches_row(r, want)?;
    }
    let tsv = emit_report(&reports, ReportFormat::Tsv);
    let de = "localized\tDE\t99.44\t90.78\t90.27\t4052\t436\t4488";
    let avg = "localized\tAVG\t98.49\t89.43\t88.16\t3957\t531\t4488";
    if !tsv.lines().any(|l| l == de) || !tsv.lines().any(|l| l == avg) {
        return Err(format!("table layout:\n{tsv}"));
    }
    Ok(format!(
        "{} rows and {} AVG rows within 0.01",
        SUCCESS_TABLE.len(),
        SUCCESS_AVG.len()
    ))
}

fn distribution_preservation() -> Check {
    let policy = OperationPolicy::matis();
    let mut runs = 0;
    for seed in [1u64, 7, 42] {
        let en = synthetic::corpus(150, seed);
        let expected = en.intent_distribution();
        for rate in [0.0, 0.3, 1.0] {
            for lang in synthetic::LANGUAGES {
                let target = TargetLanguage::from_code(lang).unwrap();
                let reference =
                    synthetic::reference_translation(&synthetic::corpus(100, seed + 1), &target, &policy, seed)
                        .map_err(|e| e.to_string())?;
                let oracle = BaselineTagger::train(&en.clone().concat(reference), &Default::default());
                let mut lex = synthetic::lexicon(&[lang]);
                lex.noise = NoiseRates {
                    malformed_rate: rate,
                    wrong_index_rate: 0.05,
                    wrong_value_rate: 0.1,
                };
                lex.seed = seed;
                let config = RoundConfig {
                    sampling: SamplingConfig::with_n(4),
                    jobs: 4,
                    ..Default::default()
                };
                let out = run_round(
                    &en,
                    &target,
                    &MockBackend::new(lex),
                    Some(&oracle),
                    &policy,
                    &config,
                    seed,
                    0,
                )
                .map_err(|e| e.to_string())?;
                let got = out.dataset.intent_distribution();
                if got != expected {
                    return Err(format!("seed {seed} rate {rate} {lang}: {got} vs {expected}"));
                }
                if rate == 1.0 && out.stats.selected_generated != 0 {
                    return Err(format!("rate 1.0 still generated {}", out.stats.selected_generated));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs at malformed_rate 0, 0.3, 1.0"))
}

fn noise_calibration() -> Check {
    let en = synthetic::corpus(1250, 3);
    let mut lex = synthetic::lexicon(&["de"]);
    lex.noise = NoiseRates::malformed(0.28);
    lex.seed = 3;
    let config = RoundConfig {
        sampling: SamplingConfig::with_n(8),
        jobs: 8,
        ..Default::default()
    };
    let de = TargetLanguage::from_code("de").unwrap();
    let out = run_round(
        &en,
        &de,
        &MockBackend::new(lex),
        None,
        &OperationPolicy::matis(),
        &config,
        3,
        0,
    )
    .map_err(|e| e.to_string())?;
    let s = out.stats;
    let survival = 100.0 * s.parse_pass as f64 / s.candidates as f64;
    let detail = format!("{survival:.2}% of {} candidates survive", s.candidates);
    if s.candidates >= 10_000 && (survival - 72.0).abs() <= 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corruption(sel: &[SelectionOutcome]) -> f64 {
    let generated: Vec<usize> = sel.iter().filter_map(|o| o.candidate_index()).collect();
    generated.iter().filter(|&&i| i == 1).count() as f64 / generated.len().max(1) as f64
}

fn ifm_efficacy() -> Check {
    let start = Instant::now();
    let de = TargetLanguage::from_code("de").unwrap();
    let policy = OperationPolicy::matis();
    let en = synthetic::corpus(2000, 21);
    let clean = synthetic::lexicon(&["de"]);
    let mut dirty = clean.clone();
    dirty.noise = NoiseRates {
        wrong_value_rate: 1.0,
        ..Default::default()
    };
    let one = SamplingConfig::with_n(1);
    let mut pools = Vec::with_capacity(en.len());
    for (i, u) in en.iter().enumerate() {
        let id = format!("de:{i}");
        let prompt = build_prompt(u, &de, synthetic::DOMAIN, &policy).map_err(|e| e.to_string())?;
        let a = mock_generate(&clean, &id, &prompt, &one)
            .map_err(|e| e.to_string())?
            .candidates
            .remove(0);
        let b = mock_generate(&dirty, &id, &prompt, &one)
            .map_err(|e| e.to_string())?
            .candidates
            .remove(0);
        let mut candidates = heuristic_filter(CandidateSet::new(id.clone(), vec![a, b]), &prompt);
        for c in 0..2 {
            candidates.record(c, Stage::IntentFilter, true);
        }
        if candidates.survivors() != [0, 1] {
            return Err(format!("{id}: pool members do not both parse"));
        }
        pools.push(PromptPool {
            prompt_id: id,
            source: u.clone(),
            prompt,
            candidates,
            error: None,
        });
    }
    let heldout =
        synthetic::reference_translation(&synthetic::corpus(200, 22), &de, &policy, 5).map_err(|e| e.to_string())?;
    let state = IfmState::initial(BTreeMap::from([("de".to_string(), pools)]), 17);
    let rate0 = corruption(&state.selections["de"]);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    let out = ifm_run(
        &en,
        state,
        &BaselineTrainer::default(),
        &heldout,
        &IfmConfig {
            base_seed: 17,
            jobs: 8,
            ..Default::default()
        },
        &mut |s| {
            rates.push(corruption(&s.selections["de"]));
            write_checkpoint(dir.path(), s).map(|_| ())
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let files = fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count();
    let detail = format!(
        "round 0 {:.1}%, round 1 {:.1}%, {} rounds, {files} checkpoints, {:.1}s",
        100.0 * rate0,
        100.0 * rates[0],
        out.round,
        elapsed.as_secs_f64()
    );
    let ok = (rate0 - 0.5).abs() <= 0.02
        && rates[0] < 0.25
        && out.round == 2
        && files == 2
        && checkpoint_path(dir.path(), 2).exists()
        && elapsed < Duration::from_secs(120);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Triple = (String, usize, usize);

fn brute_force(preds: &[Vec<SlotSpan>], golds: &[Vec<SlotSpan>]) -> (f64, f64, f64) {
    let set = |spans: &[SlotSpan]| {
        let mut v: Vec<Triple> = Vec::new();
        for s in spans {
            let t = (s.label.clone(), s.start, s.end);
            if !v.contains(&t) {
                v.push(t);
            }
        }
        v
    };
    let (mut hit, mut np, mut ng) = (0usize, 0usize, 0usize);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (set(p), set(g));
        hit += p.iter().filter(|t| g.contains(t)).count();
        np += p.len();
        ng += g.len();
    }
    if np == 0 && ng == 0 {
        return (1.0, 1.0, 1.0);
    }
    let precision = if np == 0 { 0.0 } else { hit as f64 / np as f64 };
    let recall = if ng == 0 { 0.0 } else { hit as f64 / ng as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

fn spans() -> impl Strategy<Value = Vec<SlotSpan>> {
    prop::collection::vec((prop::sample::select(&["a", "b"][..]), 0usize..4, 0usize..2), 0..5)
        .prop_map(|v| v.into_iter().map(|(l, s, n)| SlotSpan::new(s, s + n, l)).collect())
}

fn metric_oracles() -> Check {
    let intents = prop::sample::select(&["flight", "airfare", "airline"][..]);
    let sentence = (spans(), spans(), intents.clone(), intents);
    let mut run = runner(50);
    run.run(&prop::collection::vec(sentence, 1..40), |corpus| {
        let preds: Vec<Vec<SlotSpan>> = corpus.iter().map(|c| c.0.clone()).collect();
        let golds: Vec<Vec<SlotSpan>> = corpus.iter().map(|c| c.1.clone()).collect();
        let s = slot_f1(&preds, &golds).unwrap();
        prop_assert_eq!((s.precision, s.recall, s.f1), brute_force(&preds, &golds));
        let pi: Vec<&str> = corpus.iter().map(|c| c.2).collect();
        let gi: Vec<&str> = corpus.iter().map(|c| c.3).collect();
        let mut hits = 0;
        for i in 0..pi.len() {
            if pi[i] == gi[i] {
                hits += 1;
            }
        }
        prop_assert_eq!(ic_accuracy(&pi, &gi).unwrap(), hits as f64 / pi.len() as f64);
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok("50 random corpora".into())
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run_pipeline(out: &Path, jobs: &str) -> Result<(), String> {
    let config = fixture("config.toml");
    let set = format!("paths.output={}", out.display());
    for stage in ["generate", "filter", "ifm", "evaluate", "report"] {
        let o = Command::new(env!("CARGO_BIN_EXE_slotloc"))
            .args(["--config", config.to_str().unwrap(), "--set", &set, "--seed", "7"])
            .args(["--jobs", jobs, "--log-level", "warn", stage])
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{stage}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = HashMap::new();
    for jobs in ["1", "8"] {
        for run in 0..2 {
            let out = dir.path().join(format!("j{jobs}-{run}"));
            run_pipeline(&out, jobs)?;
            trees.insert((jobs, run), tree(&out));
        }
    }
    let base = &trees[&("1", 0)];
    if base.is_empty() {
        return Err("empty output tree".into());
    }
    for (key, t) in &trees {
        if t != base {
            let differing: Vec<_> = t.keys().filter(|k| base.get(*k) != t.get(*k)).collect();
            return Err(format!("run {key:?} differs in {differing:?}"));
        }
    }
    Ok(format!("4 runs, {} identical files each", base.len()))
}

fn main() -> ExitCode {
    let checks: &[Criterion] = &[
        ("prompt fidelity", prompt_fidelity),
        ("bracket grammar fuzz", bracket_grammar),
        ("success-rate identities", success_rates),
        ("distribution preservation", distribution_preservation),
        ("noise calibration", noise_calibration),
        ("iterative filtering efficacy", ifm_efficacy),
        ("metric oracles", metric_oracles),
        ("end-to-end determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.2}s)");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
