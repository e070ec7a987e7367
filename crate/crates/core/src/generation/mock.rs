//! Deterministic lexicon-driven stand-in for a neural generator.
//!
//! Each candidate is assembled from the prompt's English example: carrier
//! tokens go through `carrier`, slot values are copied, translated or
//! localized according to their instruction, and the result is then
//! corrupted with the configured noise. The random stream of candidate `i`
//! of prompt `p` is keyed by `(seed, p, i)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BackendCapabilities, Candidate, CandidateSet, GenerationError, GeneratorBackend, SamplingConfig};
use crate::bracket;
use crate::prompt::{GenerationPrompt, SlotOperation};
use crate::rng::StreamKey;

/// Key in `localizations` used for phrases without a dedicated entry.
pub const ANY_PHRASE: &str = "*";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageLexicon {
    /// Phrase -> phrase. Phrases without an entry are translated word by word
    /// through this map and `carrier`.
    pub translations: BTreeMap<String, String>,
    /// Phrase -> candidate replacements; `"*"` applies to any phrase.
    pub localizations: BTreeMap<String, Vec<String>>,
    /// English carrier token -> target token. Unmapped tokens pass through.
    pub carrier: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseRates {
    /// Delete one bracket.
    pub malformed_rate: f64,
    /// Replace one slot index with `max + 1`.
    pub wrong_index_rate: f64,
    /// Swap one slot value with a carrier token.
    pub wrong_value_rate: f64,
}

impl NoiseRates {
    pub fn malformed(rate: f64) -> Self {
        NoiseRates {
            malformed_rate: rate,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockLexicon {
    /// Keyed by primary language code (`"de"`).
    pub languages: BTreeMap<String, LanguageLexicon>,
    #[serde(default)]
    pub noise: NoiseRates,
    #[serde(default)]
    pub seed: u64,
}

impl MockLexicon {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let rates = [
            ("malformed_rate", self.noise.malformed_rate),
            ("wrong_index_rate", self.noise.wrong_index_rate),
            ("wrong_value_rate", self.noise.wrong_value_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(GenerationError::InvalidConfig(format!("{name} {r} outside [0, 1]")));
            }
        }
        for (lang, lex) in &self.languages {
            if let Some((phrase, _)) = lex.localizations.iter().find(|(_, v)| v.is_empty()) {
                return Err(GenerationError::InvalidConfig(format!(
                    "{lang}: empty localization list for {phrase:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let text =
            fs::read_to_string(path).map_err(|e| GenerationError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let lex: MockLexicon = serde_json::from_str(&text)
            .map_err(|e| GenerationError::InvalidConfig(format!("{}: {e}", path.display())))?;
        lex.validate()?;
        Ok(lex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Word(String),
    Open(u32),
    Close,
}

fn render(pieces: &[Piece]) -> String {
    let parts: Vec<String> = pieces
        .iter()
        .map(|p| match p {
            Piece::Word(w) => w.clone(),
            Piece::Open(k) => format!("[{k}"),
            Piece::Close => "]".to_string(),
        })
        .collect();
    parts.join(" ")
}

fn words(s: &str) -> impl Iterator<Item = Piece> + '_ {
    s.split_whitespace().map(|w| Piece::Word(w.to_string()))
}

fn gap(language: &str, phrase: &str) -> GenerationError {
    GenerationError::LexiconGap {
        language: language.to_string(),
        phrase: phrase.to_string(),
    }
}

fn translate(lex: &LanguageLexicon, language: &str, phrase: &str) -> Result<String, GenerationError> {
    if let Some(t) = lex.translations.get(phrase) {
        return Ok(t.clone());
    }
    phrase
        .split_whitespace()
        .map(|w| {
            lex.translations
                .get(w)
                .or_else(|| lex.carrier.get(w))
                .cloned()
                .ok_or_else(|| gap(language, phrase))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|ws| ws.join(" "))
}

/// Builds the noiseless candidate.
fn clean_pieces(
    lex: &LanguageLexicon,
    language: &str,
    prompt: &GenerationPrompt,
    rng: &mut impl Rng,
) -> Result<Vec<Piece>, GenerationError> {
    let labels = prompt.labels();
    let example = bracket::parse_brackets(prompt.example.as_str(), &labels)
        .map_err(|r| GenerationError::BackendProtocolError(format!("prompt example does not parse: {r}")))?;
    let by_index: BTreeMap<u32, &crate::prompt::SlotInstruction> =
        prompt.instructions.iter().map(|i| (i.index, i)).collect();

    let mut pieces = Vec::new();
    let carrier = |tok: &String| lex.carrier.get(tok).cloned().unwrap_or_else(|| tok.clone());
    let mut next = 0usize;
    for (span, k) in example.slots.iter().zip(&example.indices) {
        pieces.extend(example.tokens[next..span.start].iter().map(|t| Piece::Word(carrier(t))));
        let instruction = by_index[k];
        let value = match instruction.operation {
            SlotOperation::Unchanged => instruction.source_value.clone(),
            SlotOperation::Translation => translate(lex, language, &instruction.source_value)?,
            SlotOperation::Localization => {
                let options = lex
                    .localizations
                    .get(&instruction.source_value)
                    .or_else(|| lex.localizations.get(ANY_PHRASE))
                    .ok_or_else(|| gap(language, &instruction.source_value))?;
                options.choose(rng).expect("non-empty localization list").clone()
            }
        };
        pieces.push(Piece::Open(*k));
        pieces.extend(words(&value));
        pieces.push(Piece::Close);
        next = span.end + 1;
    }
    pieces.extend(example.tokens[next..].iter().map(|t| Piece::Word(carrier(t))));
    Ok(pieces)
}

/// Slot extents as (open position, close position) pairs.
fn slot_extents(pieces: &[Piece]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, p) in pieces.iter().enumerate() {
        match p {
            Piece::Open(_) => open = Some(i),
            Piece::Close => {
                if let Some(o) = open.take() {
                    out.push((o, i));
                }
            }
            Piece::Word(_) => {}
        }
    }
    out
}

fn swap_value_with_carrier(pieces: &mut Vec<Piece>, rng: &mut impl Rng) {
    let slots = slot_extents(pieces);
    let mut inside = vec![false; pieces.len()];
    for &(o, c) in &slots {
        inside[o..=c].iter_mut().for_each(|b| *b = true);
    }
    let carriers: Vec<usize> = (0..pieces.len())
        .filter(|&i| !inside[i] && matches!(pieces[i], Piece::Word(_)))
        .collect();
    if slots.is_empty() || carriers.is_empty() {
        return;
    }
    let (open, close) = slots[rng.random_range(0..slots.len())];
    let carrier = carriers[rng.random_range(0..carriers.len())];
    let value: Vec<Piece> = pieces[open + 1..close].to_vec();
    let carrier_word = pieces[carrier].clone();
    // splice the later region first so earlier indices stay valid
    if carrier > close {
        pieces.splice(carrier..=carrier, value);
        pieces.splice(open + 1..close, [carrier_word]);
    } else {
        pieces.splice(open + 1..close, [carrier_word]);
        pieces.splice(carrier..=carrier, value);
    }
}

fn corrupt_index(pieces: &mut [Piece], max_index: u32, rng: &mut impl Rng) {
    let opens: Vec<usize> = (0..pieces.len())
        .filter(|&i| matches!(pieces[i], Piece::Open(_)))
        .collect();
    if let Some(&i) = opens.get(rng.random_range(0..opens.len().max(1))) {
        pieces[i] = Piece::Open(max_index + 1);
    }
}

fn delete_bracket(pieces: &mut Vec<Piece>, rng: &mut impl Rng) {
    let brackets: Vec<usize> = (0..pieces.len())
        .filter(|&i| !matches!(pieces[i], Piece::Word(_)))
        .collect();
    if brackets.is_empty() {
        // nothing to delete: an extra bracket breaks the string instead
        pieces.push(Piece::Close);
    } else {
        pieces.remove(brackets[rng.random_range(0..brackets.len())]);
    }
}

/// Generates `config.n` candidates from the lexicon.
pub fn mock_generate(
    lexicon: &MockLexicon,
    prompt_id: &str,
    prompt: &GenerationPrompt,
    config: &SamplingConfig,
) -> Result<CandidateSet, GenerationError> {
    let candidates = (0..config.n)
        .map(|i| mock_candidate(lexicon, prompt_id, i, prompt))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CandidateSet::new(prompt_id, candidates))
}

fn mock_candidate(
    lexicon: &MockLexicon,
    prompt_id: &str,
    index: usize,
    prompt: &GenerationPrompt,
) -> Result<Candidate, GenerationError> {
    let language = crate::corpus::primary_subtag(&prompt.target_language.code);
    let lex = lexicon
        .languages
        .get(&language)
        .ok_or_else(|| gap(&language, "<language not in lexicon>"))?;
    let mut rng = StreamKey::new("mock-generate")
        .u64(lexicon.seed)
        .str(prompt_id)
        .u64(index as u64)
        .rng();
    let mut pieces = clean_pieces(lex, &language, prompt, &mut rng)?;

    let noise = lexicon.noise;
    // always draw all three so the stream layout does not depend on the rates
    let (u_value, u_index, u_malformed): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    if u_value < noise.wrong_value_rate {
        swap_value_with_carrier(&mut pieces, &mut rng);
    }
    if u_index < noise.wrong_index_rate {
        let max = prompt.instructions.iter().map(|i| i.index).max().unwrap_or(0);
        corrupt_index(&mut pieces, max, &mut rng);
    }
    if u_malformed < noise.malformed_rate {
        delete_bracket(&mut pieces, &mut rng);
    }
    Ok(Candidate::new(render(&pieces)))
}

/// [`GeneratorBackend`] over a [`MockLexicon`].
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub lexicon: MockLexicon,
}

impl MockBackend {
    pub fn new(lexicon: MockLexicon) -> Self {
        MockBackend { lexicon }
    }
}

impl GeneratorBackend for MockBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            supports_perplexity: false,
            max_concurrency: usize::MAX,
            deterministic: true,
        }
    }

    fn generate_raw(
        &self,
        prompt_id: &str,
        prompt: &GenerationPrompt,
        config: &SamplingConfig,
    ) -> Result<Vec<Candidate>, GenerationError> {
        mock_generate(&self.lexicon, prompt_id, prompt, config).map(|cs| cs.candidates)
    }
}
