//! IC accuracy, span-level slot micro-F1 and generation success-rate tables.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, SlotSpan};
use crate::filtering::{OracleError, StageStats, TaggerOracle};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {preds} predictions vs {golds} gold items")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("inconsistent stats for {language}: {message}")]
    InconsistentStats { language: String, message: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub ic_accuracy: f64,
    pub slot_precision: f64,
    pub slot_recall: f64,
    pub slot_f1: f64,
    pub n: usize,
}

fn check_len(preds: usize, golds: usize) -> Result<(), EvalError> {
    if preds != golds {
        return Err(EvalError::LengthMismatch { preds, golds });
    }
    Ok(())
}

pub fn ic_accuracy<S: AsRef<str>>(preds: &[S], golds: &[S]) -> Result<f64, EvalError> {
    check_len(preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let hits = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.as_ref() == g.as_ref())
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged exact-match span scores. A corpus with neither predicted
/// nor gold spans scores 1.0 throughout.
pub fn slot_f1(preds: &[Vec<SlotSpan>], golds: &[Vec<SlotSpan>]) -> Result<SlotScores, EvalError> {
    check_len(preds.len(), golds.len())?;
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        let p: HashSet<&SlotSpan> = p.iter().collect();
        let g: HashSet<&SlotSpan> = g.iter().collect();
        tp += p.intersection(&g).count();
        n_pred += p.len();
        n_gold += g.len();
    }
    if n_pred == 0 && n_gold == 0 {
        return Ok(SlotScores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let precision = ratio(tp, n_pred);
    let recall = ratio(tp, n_gold);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(SlotScores { precision, recall, f1 })
}

/// Tags every record of `gold` with `oracle` and scores the predictions.
pub fn evaluate_oracle(oracle: &dyn TaggerOracle, gold: &Dataset) -> Result<EvalResult, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut pred_intents = Vec::with_capacity(gold.len());
    let mut pred_spans = Vec::with_capacity(gold.len());
    for u in gold.iter() {
        let h = oracle.tag(&u.text(), &u.language)?;
        pred_intents.push(h.intent);
        pred_spans.push(h.spans);
    }
    let gold_intents: Vec<String> = gold.iter().map(|u| u.intent.clone()).collect();
    let gold_spans: Vec<Vec<SlotSpan>> = gold.iter().map(|u| u.slots.clone()).collect();
    let s = slot_f1(&pred_spans, &gold_spans)?;
    Ok(EvalResult {
        ic_accuracy: ic_accuracy(&pred_intents, &gold_intents)?,
        slot_precision: s.precision,
        slot_recall: s.recall,
        slot_f1: s.f1,
        n: gold.len(),
    })
}

/// One row of a generation success-rate table. Percentages are unrounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRateReport {
    pub method: String,
    pub language: String,
    /// Parsed candidates over all candidates.
    pub parse_success: f64,
    /// Intent-filter survivors over parsed candidates.
    pub ic_filter_success: f64,
    /// Intent-filter survivors over all candidates.
    pub final_success: f64,
    pub generated: usize,
    pub copied: usize,
    pub total: usize,
    /// A zero denominator was guarded to 0.0.
    #[serde(default)]
    pub degenerate: bool,
}

impl SuccessRateReport {
    /// `generated` is within one of `final_success` applied to `total`.
    pub fn counts_match_rate(&self) -> bool {
        let expected = (self.final_success / 100.0 * self.total as f64).round();
        (expected - self.generated as f64).abs() <= 1.0
    }
}

fn pct(num: usize, den: usize) -> f64 {
    100.0 * ratio(num, den)
}

pub fn success_report(stats: &StageStats, language: &str, method: &str) -> Result<SuccessRateReport, EvalError> {
    if let Some(message) = stats.inconsistency() {
        return Err(EvalError::InconsistentStats {
            language: language.to_string(),
            message,
        });
    }
    let report = SuccessRateReport {
        method: method.to_string(),
        language: language.to_string(),
        parse_success: pct(stats.parse_pass, stats.candidates),
        ic_filter_success: pct(stats.ic_pass, stats.parse_pass),
        final_success: pct(stats.ic_pass, stats.candidates),
        generated: stats.selected_generated,
        copied: stats.backed_off,
        total: stats.prompts,
        degenerate: stats.candidates == 0 || stats.parse_pass == 0,
    };
    // With several candidates per prompt the two legitimately diverge.
    if !report.degenerate && !report.counts_match_rate() {
        log::debug!(
            "{method} {language}: {} generated differs from {:.2}% of {} by more than one",
            report.generated,
            report.final_success,
            report.total
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Markdown,
    Jsonl,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "jsonl" => Ok(ReportFormat::Jsonl),
            _ => Err(format!("unknown report format {s:?} (tsv | markdown | jsonl)")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Tsv => "tsv",
            ReportFormat::Markdown => "md",
            ReportFormat::Jsonl => "jsonl",
        }
    }
}

/// Rounds half away from zero to two decimals. The epsilon absorbs binary
/// representation error (`x.xx5` stored as `x.xx4999…`).
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-9).floor() / 100.0
}

fn round_count(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Macro average of one method's rows, taken over the rates as displayed
/// (two decimals).
pub fn average(rows: &[&SuccessRateReport]) -> Option<SuccessRateReport> {
    let first = rows.first()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&SuccessRateReport) -> f64| rows.iter().map(|r| round2(f(r))).sum::<f64>() / n;
    Some(SuccessRateReport {
        method: first.method.clone(),
        language: "AVG".into(),
        parse_success: mean(|r| r.parse_success),
        ic_filter_success: mean(|r| r.ic_filter_success),
        final_success: mean(|r| r.final_success),
        generated: round_count(mean(|r| r.generated as f64)),
        copied: round_count(mean(|r| r.copied as f64)),
        total: round_count(mean(|r| r.total as f64)),
        degenerate: rows.iter().any(|r| r.degenerate),
    })
}

/// Input rows grouped by method (first-appearance order), each group
/// followed by its AVG row.
pub fn with_averages(reports: &[SuccessRateReport]) -> Vec<SuccessRateReport> {
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = Vec::new();
    for m in methods {
        let group: Vec<&SuccessRateReport> = reports.iter().filter(|r| r.method == m).collect();
        out.extend(group.iter().map(|r| (*r).clone()));
        out.extend(average(&group));
    }
    out
}

const COLUMNS: [&str; 8] = [
    "Method",
    "Lang",
    "Parse",
    "IC",
    "Final",
    "#Generated",
    "#Copied",
    "Total",
];

fn cells(r: &SuccessRateReport) -> [String; 8] {
    [
        r.method.clone(),
        r.language.clone(),
        format!("{:.2}", round2(r.parse_success)),
        format!("{:.2}", round2(r.ic_filter_success)),
        format!("{:.2}", round2(r.final_success)),
        r.generated.to_string(),
        r.copied.to_string(),
        r.total.to_string(),
    ]
}

/// Renders reports plus one AVG row per method.
pub fn emit_report(reports: &[SuccessRateReport], format: ReportFormat) -> String {
    let rows = with_averages(reports);
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            out.push_str(&COLUMNS.join("\t"));
            out.push('\n');
            for r in &rows {
                out.push_str(&cells(r).join("\t"));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for r in &rows {
                let _ = writeln!(out, "| {} |", cells(r).join(" | "));
            }
        }
        ReportFormat::Jsonl => {
            for r in &rows {
                let mut r = r.clone();
                r.parse_success = round2(r.parse_success);
                r.ic_filter_success = round2(r.ic_filter_success);
                r.final_success = round2(r.final_success);
                out.push_str(&serde_json::to_string(&r).expect("report serializes"));
                out.push('\n');
            }
        }
    }
    out
}
