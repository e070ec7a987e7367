//! Lightweight deterministic tagger used as the default oracle.
//!
//! Intent: nearest centroid (cosine) over L2-normalized token-count vectors.
//! Slots: a surface -> label lexicon decoded longest match first. A surface
//! is kept only when its most frequent label occurs more often than the same
//! token sequence appears outside any span.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TaggerTrainer;
use crate::corpus::{Dataset, SlotSpan};
use crate::filtering::{Hypothesis, OracleError, TaggerOracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Longest surface (in tokens) kept in the slot lexicon.
    pub max_span_tokens: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { max_span_tokens: 8 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BaselineTrainer {
    pub config: BaselineConfig,
}

impl BaselineTrainer {
    pub fn new(config: BaselineConfig) -> Self {
        BaselineTrainer { config }
    }
}

impl TaggerTrainer for BaselineTrainer {
    fn train(&self, data: &Dataset) -> Result<Arc<dyn TaggerOracle>, OracleError> {
        Ok(Arc::new(BaselineTagger::train(data, &self.config)))
    }
}

type Vector = HashMap<String, f64>;

fn normalized_counts<'a>(tokens: impl Iterator<Item = &'a str>) -> Vector {
    let mut v: Vector = HashMap::new();
    for t in tokens {
        *v.entry(t.to_string()).or_default() += 1.0;
    }
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Debug, Clone)]
pub struct BaselineTagger {
    /// Unit-length centroid per intent, in intent order.
    centroids: Vec<(String, Vector)>,
    lexicon: HashMap<Vec<String>, String>,
    max_len: usize,
}

impl BaselineTagger {
    pub fn train(data: &Dataset, config: &BaselineConfig) -> Self {
        let mut sums: BTreeMap<String, (Vector, usize)> = BTreeMap::new();
        for u in data.iter() {
            let v = normalized_counts(u.tokens.iter().map(String::as_str));
            let entry = sums.entry(u.intent.clone()).or_default();
            // sort for a fixed summation order
            let mut items: Vec<_> = v.into_iter().collect();
            items.sort_by(|a, b| a.0.cmp(&b.0));
            for (t, x) in items {
                *entry.0.entry(t).or_default() += x;
            }
            entry.1 += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(intent, (mut v, _))| {
                let mut keys: Vec<&String> = v.keys().collect();
                keys.sort();
                let norm = keys.iter().map(|k| v[*k] * v[*k]).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.values_mut().for_each(|x| *x /= norm);
                }
                (intent, v)
            })
            .collect();

        let mut span_counts: HashMap<Vec<String>, BTreeMap<String, usize>> = HashMap::new();
        let mut max_len = 0;
        for u in data.iter() {
            for s in &u.slots {
                let len = s.end - s.start + 1;
                if len > config.max_span_tokens {
                    continue;
                }
                max_len = max_len.max(len);
                *span_counts
                    .entry(u.tokens[s.start..=s.end].to_vec())
                    .or_default()
                    .entry(s.label.clone())
                    .or_default() += 1;
            }
        }
        let mut outside: HashMap<&[String], usize> = HashMap::new();
        for u in data.iter() {
            let mut in_span = vec![false; u.tokens.len()];
            for s in &u.slots {
                in_span[s.start..=s.end].iter_mut().for_each(|b| *b = true);
            }
            for start in 0..u.tokens.len() {
                for (end, &inside) in in_span.iter().enumerate().take(start + max_len).skip(start) {
                    if inside {
                        break;
                    }
                    let gram = &u.tokens[start..=end];
                    if span_counts.contains_key(gram) {
                        *outside.entry(gram).or_default() += 1;
                    }
                }
            }
        }
        let lexicon = span_counts
            .iter()
            .filter_map(|(surface, labels)| {
                let mut best: Option<(&String, usize)> = None;
                for (label, &n) in labels {
                    if best.is_none_or(|(_, b)| n > b) {
                        best = Some((label, n));
                    }
                }
                let (label, n) = best?;
                let o = outside.get(surface.as_slice()).copied().unwrap_or(0);
                (n > o).then(|| (surface.clone(), label.clone()))
            })
            .collect();
        BaselineTagger {
            centroids,
            lexicon,
            max_len,
        }
    }

    pub fn predict_intent(&self, tokens: &[&str]) -> String {
        let q = normalized_counts(tokens.iter().copied());
        let mut best: Option<(&str, f64)> = None;
        for (intent, c) in &self.centroids {
            let mut keys: Vec<&String> = q.keys().collect();
            keys.sort();
            let score: f64 = keys.iter().map(|k| q[*k] * c.get(*k).copied().unwrap_or(0.0)).sum();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((intent, score));
            }
        }
        best.map(|(i, _)| i.to_string()).unwrap_or_default()
    }

    pub fn predict_spans(&self, tokens: &[&str]) -> Vec<SlotSpan> {
        let mut spans = Vec::new();
        let mut i = 0;
        'outer: while i < tokens.len() {
            for n in (1..=self.max_len.min(tokens.len() - i)).rev() {
                let key: Vec<String> = tokens[i..i + n].iter().map(|t| t.to_string()).collect();
                if let Some(label) = self.lexicon.get(&key) {
                    spans.push(SlotSpan::new(i, i + n - 1, label.clone()));
                    i += n;
                    continue 'outer;
                }
            }
            i += 1;
        }
        spans
    }
}

impl TaggerOracle for BaselineTagger {
    fn tag(&self, text: &str, _language: &str) -> Result<Hypothesis, OracleError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        Ok(Hypothesis {
            intent: self.predict_intent(&tokens),
            spans: self.predict_spans(&tokens),
        })
    }
}
