//! Key-phrase lexicon, longest-match phrase detection, and snippet windows.
//!
//! A "word" throughout this module is a whitespace-delimited raw token.
//! Matching is case-insensitive after stripping leading/trailing punctuation
//! from each token, so "Percocet," matches "percocet" but "dependenceX" does
//! not match "dependence".

use crate::corpus::NoteRecord;
use crate::{Error, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhraseCategory {
    SpecificDrugName,
    OtherKeyPhrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPhrase {
    pub text: String,
    pub category: PhraseCategory,
}

impl KeyPhrase {
    pub fn new(text: &str, category: PhraseCategory) -> Self {
        KeyPhrase {
            text: text.to_string(),
            category,
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

/// Key phrases ordered for longest-match-first scanning: descending word
/// count, then descending character length.
#[derive(Debug, Clone)]
pub struct Lexicon {
    phrases: Vec<KeyPhrase>,
}

impl Lexicon {
    pub fn phrases(&self) -> &[KeyPhrase] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Parse a lexicon from `phrase<TAB>category` lines. '#' comments allowed.
pub fn parse_lexicon(source: &str, origin: &str) -> Result<Lexicon> {
    let mut phrases: Vec<KeyPhrase> = Vec::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let text = cols.next().unwrap_or("").trim();
        let category = match cols.next().map(str::trim) {
            Some("SpecificDrugName") => PhraseCategory::SpecificDrugName,
            Some("OtherKeyPhrase") => PhraseCategory::OtherKeyPhrase,
            other => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    msg: format!("unknown category {:?}", other.unwrap_or("")),
                })
            }
        };
        if text.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: "empty phrase".into(),
            });
        }
        if text != text.to_lowercase() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("phrase '{text}' is not lowercase"),
            });
        }
        let words = text.split_whitespace().count();
        if !(1..=2).contains(&words) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("phrase '{text}' must have 1-2 words"),
            });
        }
        if phrases.iter().any(|p| p.text == text) {
            return Err(Error::DuplicateKey {
                kind: "key phrase",
                key: text.to_string(),
            });
        }
        phrases.push(KeyPhrase::new(text, category));
    }
    if phrases.is_empty() {
        return Err(Error::InvalidRecord(format!("{origin}: empty lexicon")));
    }
    phrases.sort_by(|a, b| {
        b.word_count()
            .cmp(&a.word_count())
            .then(b.text.len().cmp(&a.text.len()))
            .then(a.text.cmp(&b.text))
    });
    Ok(Lexicon { phrases })
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let source = std::fs::read_to_string(path)?;
    parse_lexicon(&source, &path.display().to_string())
}

/// The default 36-phrase lexicon.
pub fn default_lexicon() -> Lexicon {
    parse_lexicon(crate::DEFAULT_LEXICON, "<builtin>").expect("builtin lexicon parses")
}

/// A whitespace-delimited token of the original text.
#[derive(Debug, Clone)]
pub struct RawToken {
    /// Byte range in the original text.
    pub start: usize,
    pub end: usize,
    /// Lowercased token with leading/trailing non-alphanumeric chars removed.
    pub stripped: String,
}

pub fn raw_tokens(text: &str) -> Vec<RawToken> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        // find start of next token
        while i < bytes.len() && text[i..].chars().next().unwrap().is_whitespace() {
            i += text[i..].chars().next().unwrap().len_utf8();
        }
        if i >= bytes.len() {
            break;
        }
        let start = i;
        while i < bytes.len() {
            let c = text[i..].chars().next().unwrap();
            if c.is_whitespace() {
                break;
            }
            i += c.len_utf8();
        }
        let word = &text[start..i];
        let stripped = word
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        tokens.push(RawToken {
            start,
            end: i,
            stripped,
        });
    }
    tokens
}

/// A key-phrase occurrence: phrase index into the lexicon plus the raw-token
/// index of the phrase's first word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch {
    pub phrase_index: usize,
    pub token_index: usize,
}

fn matches_at(phrase: &KeyPhrase, tokens: &[RawToken], at: usize) -> bool {
    if at + phrase.word_count() > tokens.len() {
        return false;
    }
    phrase.words().zip(&tokens[at..]).all(|(w, t)| w == t.stripped)
}

/// Every key-phrase occurrence in `text`. At any token position the longest
/// matching phrase wins; shorter phrases at the same position are suppressed.
/// Phrases starting at different positions each produce their own match.
pub fn find_key_phrases<'a>(text: &str, lexicon: &'a Lexicon) -> Vec<(&'a KeyPhrase, usize)> {
    let tokens = raw_tokens(text);
    find_in_tokens(&tokens, lexicon)
        .into_iter()
        .map(|m| (&lexicon.phrases[m.phrase_index], m.token_index))
        .collect()
}

pub fn find_in_tokens(tokens: &[RawToken], lexicon: &Lexicon) -> Vec<PhraseMatch> {
    let mut matches = Vec::new();
    for i in 0..tokens.len() {
        for (pi, phrase) in lexicon.phrases.iter().enumerate() {
            if matches_at(phrase, tokens, i) {
                matches.push(PhraseMatch {
                    phrase_index: pi,
                    token_index: i,
                });
                break; // longest wins at this position
            }
        }
    }
    matches
}

/// A key-phrase occurrence with its surrounding context window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snippet {
    pub note_id: String,
    pub patient_id: String,
    pub note_date: NaiveDate,
    pub note_type: String,
    pub key_phrase: KeyPhrase,
    /// Window text, original casing and punctuation preserved.
    pub text: String,
    /// Raw-token index of the key phrase's first word within the window.
    pub kp_token_index: usize,
    /// Raw-token index of the key phrase's first word in the full note.
    pub kp_source_token_index: usize,
    pub window_radius: usize,
}

impl Snippet {
    /// Stable identifier: note plus original token offset.
    pub fn id(&self) -> String {
        format!("{}:{}", self.note_id, self.kp_source_token_index)
    }
}

/// One snippet per key-phrase occurrence: the phrase plus up to
/// `window_radius` raw tokens on each side, clamped at note boundaries.
pub fn extract_snippets(note: &NoteRecord, lexicon: &Lexicon, window_radius: usize) -> Vec<Snippet> {
    let tokens = raw_tokens(&note.text);
    let mut snippets = Vec::new();
    for m in find_in_tokens(&tokens, lexicon) {
        let phrase = &lexicon.phrases[m.phrase_index];
        let start = m.token_index.saturating_sub(window_radius);
        let last = (m.token_index + phrase.word_count() - 1 + window_radius).min(tokens.len() - 1);
        let text = note.text[tokens[start].start..tokens[last].end].to_string();
        snippets.push(Snippet {
            note_id: note.note_id.clone(),
            patient_id: note.patient_id.clone(),
            note_date: note.note_date,
            note_type: note.note_type.clone(),
            key_phrase: phrase.clone(),
            text,
            kp_token_index: m.token_index - start,
            kp_source_token_index: m.token_index,
            window_radius,
        });
    }
    snippets
}
