//! Cross-lingual synthetic data localization for intent classification and
//! slot tagging corpora.
//!
//! The pipeline takes English IC+ST records, renders bracket-annotated
//! instruction prompts with per-slot copy / translate / localize controls,
//! samples n-best candidates from a generator backend, filters them
//! (bracket validation, intent agreement, English backoff) and refines the
//! selection with iterative tagger-driven filtering.

pub mod bracket;
pub mod corpus;
pub mod evaluation;
pub mod filtering;
pub mod generation;
pub mod ifm;
pub mod prompt;
pub mod remote;
pub mod rng;
pub mod synthetic;

pub use bracket::{BracketString, IndexLabels, ValidationMode, ValidationReport};
pub use corpus::{AnnotatedUtterance, Dataset, DatasetFormat, IntentDistribution, SlotSpan};
pub use filtering::{SelectionOutcome, StageStats, TaggerOracle};
pub use generation::{Candidate, CandidateSet, GeneratorBackend, SamplingConfig};
pub use prompt::{GenerationPrompt, OperationPolicy, SlotInstruction, SlotOperation, TargetLanguage};
