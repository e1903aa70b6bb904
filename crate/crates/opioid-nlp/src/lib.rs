//! Pipeline for finding documentation of problematic opioid use in free-text
//! clinical notes.
//!
//! The pipeline is a cascade: a key-phrase lexicon selects snippets from note
//! text, a categorized regular-expression library classifies snippets by
//! sequential voting, and a linear classifier handles whatever the rules
//! leave undecided. Patient groups derived from note classifications and ICD
//! codes are then compared with a small statistics battery (absolute
//! standardized differences, Welch t, chi-square).

pub mod cascade;
pub mod cohort;
pub mod corpus;
mod error;
pub mod features;
pub mod learner;
pub mod lexicon;
pub mod metrics;
pub mod rules;

pub use error::Error;

use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, Error>;

/// Snippet-level class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

/// Patient group by identification method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Qualifying ICD code in the study window (may also have positive notes).
    AllIcd,
    /// Positive notes only, no qualifying ICD code.
    NlpOnly,
    /// Neither.
    NoProblematic,
}

/// Default key-phrase lexicon (36 phrases).
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");
/// Starter rule library covering all four pattern categories.
pub const DEFAULT_RULES: &str = include_str!("../data/rules.tsv");
/// Default comorbidity-variable to ICD-prefix map.
pub const DEFAULT_COMORBIDITY_MAP: &str = include_str!("../data/comorbidity_map.tsv");
