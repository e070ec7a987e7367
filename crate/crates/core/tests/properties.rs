use proptest::prelude::*;

use slotloc_core::bracket::{parse_brackets, parse_brackets_with, serialize_brackets, validate, IndexLabels};
use slotloc_core::corpus::{parse_bio, read_dataset_str, to_bio, write_dataset_string, BioMode, LabelSchema};
use slotloc_core::filtering::{run_round, RoundConfig};
use slotloc_core::generation::{MockBackend, NoiseRates};
use slotloc_core::{
    synthetic, AnnotatedUtterance, DatasetFormat, OperationPolicy, SamplingConfig, SlotSpan, TargetLanguage,
    ValidationMode,
};

const LABELS: &[&str] = &["fromloc.city_name", "toloc.city_name", "airline_name", "date", "b-x"];

/// Tokens plus non-overlapping spans and a bijective index map.
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bracket_round_trip((tokens, spans, map) in tagged()) {
        let (s, labels) = serialize_brackets(&tokens, &spans, &map).unwrap();
        let parse = parse_brackets(s.as_str(), &labels).unwrap();
        prop_assert_eq!(parse.tokens, tokens);
        prop_assert_eq!(parse.slots, spans);
        prop_assert_eq!(parse.indices, map);
    }

    #[test]
    fn subset_mode_accepts_dropped_indices((tokens, spans, map) in tagged(), extra in 50u32..60) {
        let (s, mut labels) = serialize_brackets(&tokens, &spans, &map).unwrap();
        labels.insert(extra, "unused".into());
        prop_assert!(!validate(s.as_str(), &labels, ValidationMode::Exact).ok());
        prop_assert!(parse_brackets_with(s.as_str(), &labels, ValidationMode::Subset).is_ok());
    }

    #[test]
    fn parser_total_on_arbitrary_text(s in "\\PC{0,40}", k in 0u32..4) {
        let labels: IndexLabels = (1..=k).map(|i| (i, format!("l{i}"))).collect();
        for mode in [ValidationMode::Exact, ValidationMode::Subset] {
            let report = validate(&s, &labels, mode);
            let parsed = parse_brackets_with(&s, &labels, mode);
            prop_assert_eq!(report.ok(), parsed.is_ok());
        }
    }

    #[test]
    fn bio_round_trip((tokens, spans, _) in tagged()) {
        let tags = to_bio(tokens.len(), &spans);
        prop_assert_eq!(parse_bio(&tokens, &tags, BioMode::Strict).unwrap(), spans.clone());
        prop_assert_eq!(parse_bio(&tokens, &tags, BioMode::Repair).unwrap(), spans);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_formats_round_trip(items in prop::collection::vec(tagged(), 1..8)) {
        let records: Vec<AnnotatedUtterance> = items
            .into_iter()
            .map(|(t, s, _)| AnnotatedUtterance::new(t, "flight", "en", s).unwrap().with_domain("travel"))
            .collect();
        let d = slotloc_core::Dataset::new(records, "p");
        for fmt in [DatasetFormat::BioTsv, DatasetFormat::BracketLines] {
            let text = write_dataset_string(&d, fmt).unwrap();
            let back = read_dataset_str(&text, fmt, "p", Some(&LabelSchema::from_dataset(&d))).unwrap();
            prop_assert_eq!(&back.records, &d.records);
            prop_assert_eq!(write_dataset_string(&back, fmt).unwrap(), text);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rounds_preserve_intent_distribution(seed in any::<u64>(), rate in 0.0f64..=1.0, n in 1usize..40) {
        let en = synthetic::corpus(n, seed);
        let mut lex = synthetic::lexicon(&["fr"]);
        lex.noise = NoiseRates { malformed_rate: rate, wrong_index_rate: rate / 2.0, wrong_value_rate: 0.1 };
        lex.seed = seed;
        let config = RoundConfig { sampling: SamplingConfig::with_n(3), ..Default::default() };
        let out = run_round(
            &en,
            &TargetLanguage::new("fr", "French"),
            &MockBackend::new(lex),
            None,
            &OperationPolicy::matis(),
            &config,
            seed,
            0,
        )
        .unwrap();
        prop_assert_eq!(out.dataset.len(), en.len());
        prop_assert_eq!(out.dataset.intent_distribution(), en.intent_distribution());
        prop_assert_eq!(out.stats.inconsistency(), None);
        for pool in &out.pools {
            let cs = &pool.candidates;
            let heuristic: Vec<usize> = (0..cs.len()).filter(|&i| cs.verdict(i, slotloc_core::generation::Stage::Heuristic) == Some(true)).collect();
            prop_assert!(cs.survivors().iter().all(|i| heuristic.contains(i)));
        }
    }
}
