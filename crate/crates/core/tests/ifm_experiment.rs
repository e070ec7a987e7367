use std::collections::BTreeMap;

use slotloc_core::filtering::{heuristic_filter, PromptPool};
use slotloc_core::generation::{mock_generate, CandidateSet, NoiseRates};
use slotloc_core::ifm::{ifm_run, BaselineTrainer, IfmConfig, IfmState};
use slotloc_core::prompt::build_prompt;
use slotloc_core::{synthetic, OperationPolicy, SamplingConfig, SelectionOutcome, TargetLanguage};

fn corruption(sel: &[SelectionOutcome]) -> (usize, usize) {
    let generated: Vec<usize> = sel.iter().filter_map(|o| o.candidate_index()).collect();
    (generated.iter().filter(|&&i| i == 1).count(), generated.len())
}

#[test]
fn agreement_filtering_removes_corrupted_candidates() {
    let de = TargetLanguage::new("de", "German");
    let policy = OperationPolicy::matis();
    let en = synthetic::corpus(600, 21);
    let clean = synthetic::lexicon(&["de"]);
    let mut dirty = clean.clone();
    dirty.noise = NoiseRates {
        wrong_value_rate: 1.0,
        ..Default::default()
    };
    let one = SamplingConfig::with_n(1);
    let pools: Vec<PromptPool> = en
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let id = format!("de:{i}");
            let prompt = build_prompt(u, &de, synthetic::DOMAIN, &policy).unwrap();
            let a = mock_generate(&clean, &id, &prompt, &one).unwrap().candidates.remove(0);
            let b = mock_generate(&dirty, &id, &prompt, &one).unwrap().candidates.remove(0);
            assert_ne!(a.text, b.text);
            let candidates = heuristic_filter(CandidateSet::new(id.clone(), vec![a, b]), &prompt);
            assert_eq!(candidates.survivors(), vec![0, 1]);
            PromptPool {
                prompt_id: id,
                source: u.clone(),
                prompt,
                candidates,
                error: None,
            }
        })
        .collect();
    let dev_en = synthetic::corpus(100, 22);
    let heldout = synthetic::reference_translation(&dev_en, &de, &policy, 5).unwrap();

    let state = IfmState::initial(BTreeMap::from([("de".to_string(), pools)]), 17);
    let (bad0, n0) = corruption(&state.selections["de"]);
    let rate0 = bad0 as f64 / n0 as f64;
    assert!((rate0 - 0.5).abs() < 0.06, "round 0 corruption {rate0}");

    let mut rates = Vec::new();
    let out = ifm_run(
        &en,
        state,
        &BaselineTrainer::default(),
        &heldout,
        &IfmConfig {
            base_seed: 17,
            jobs: 4,
            ..Default::default()
        },
        &mut |s| {
            let (bad, n) = corruption(&s.selections["de"]);
            rates.push((bad as f64 / n.max(1) as f64, n));
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(out.round, 2);
    assert!(rates[0].0 < 0.25, "round 1 corruption {:?}", rates);
    assert!(rates[0].1 > 300, "too few generated: {:?}", rates);
}
