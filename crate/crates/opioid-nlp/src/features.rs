//! Machine-learning stage preprocessing, vocabulary construction, and sparse
//! feature vectorization.
//!
//! Preprocessing lowercases, splits on whitespace, and removes every
//! non-alphanumeric character from each token; tokens emptied by stripping
//! are dropped and the key-phrase index is remapped onto the survivors.

use crate::lexicon::Snippet;
use crate::{Error, Label, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    /// Lowercase alphanumeric-only tokens.
    pub tokens: Vec<String>,
    /// Index of the key phrase's first surviving token.
    pub kp_index: usize,
}

fn clean_token(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Preprocess a snippet window into the ML-stage token sequence.
pub fn preprocess(snippet: &Snippet) -> Result<TokenSequence> {
    preprocess_text(&snippet.text, snippet.kp_token_index)
        .ok_or_else(|| Error::KeyPhraseEliminated(snippet.key_phrase.text.clone()))
}

/// Returns `None` when the key-phrase token itself is emptied by stripping.
pub fn preprocess_text(text: &str, kp_raw_index: usize) -> Option<TokenSequence> {
    let mut tokens = Vec::new();
    let mut kp_index = None;
    for (raw_index, raw) in text.split_whitespace().enumerate() {
        let cleaned = clean_token(raw);
        if raw_index == kp_raw_index {
            if cleaned.is_empty() {
                return None;
            }
            kp_index = Some(tokens.len());
        }
        if !cleaned.is_empty() {
            tokens.push(cleaned);
        }
    }
    kp_index.map(|kp_index| TokenSequence { tokens, kp_index })
}

/// N-gram vocabulary. Unigrams are all-letter; bigram first words are
/// all-letter, second words alphanumeric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub unigrams: Vec<String>,
    pub bigrams: Vec<(String, String)>,
    pub unigram_cap: usize,
    pub bigram_cap: usize,
    /// Document frequencies aligned with `unigrams` / `bigrams`, kept for
    /// the vocabulary dump.
    pub unigram_df: Vec<usize>,
    pub bigram_df: Vec<usize>,
}

impl Vocabulary {
    /// Total feature dimension excluding the position feature.
    pub fn ngram_dims(&self) -> usize {
        self.unigrams.len() + self.bigrams.len()
    }

    pub fn unigram_index(&self) -> HashMap<&str, usize> {
        self.unigrams
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect()
    }

    pub fn bigram_index(&self) -> HashMap<(&str, &str), usize> {
        let offset = self.unigrams.len();
        self.bigrams
            .iter()
            .enumerate()
            .map(|(i, (a, b))| ((a.as_str(), b.as_str()), offset + i))
            .collect()
    }
}

fn all_letters(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase())
}

/// Build a vocabulary from training sequences: filter candidates by character
/// class, require document frequency >= `min_df`, rank by document frequency
/// descending (lexicographic tie-break), truncate to the caps.
pub fn build_vocabulary(
    sequences: &[TokenSequence],
    unigram_cap: usize,
    bigram_cap: usize,
    min_df: usize,
) -> Result<Vocabulary> {
    if sequences.is_empty() {
        return Err(Error::InvalidRecord("no training sequences".into()));
    }
    let mut unigram_df: HashMap<&str, usize> = HashMap::new();
    let mut bigram_df: HashMap<(&str, &str), usize> = HashMap::new();
    for seq in sequences {
        let mut seen_uni: HashSet<&str> = HashSet::new();
        let mut seen_bi: HashSet<(&str, &str)> = HashSet::new();
        for token in &seq.tokens {
            if all_letters(token) {
                seen_uni.insert(token);
            }
        }
        for pair in seq.tokens.windows(2) {
            if all_letters(&pair[0]) {
                seen_bi.insert((&pair[0], &pair[1]));
            }
        }
        for u in seen_uni {
            *unigram_df.entry(u).or_insert(0) += 1;
        }
        for b in seen_bi {
            *bigram_df.entry(b).or_insert(0) += 1;
        }
    }

    let mut unigrams: Vec<(&str, usize)> = unigram_df
        .into_iter()
        .filter(|(_, df)| *df >= min_df)
        .collect();
    unigrams.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    unigrams.truncate(unigram_cap);

    let mut bigrams: Vec<((&str, &str), usize)> = bigram_df
        .into_iter()
        .filter(|(_, df)| *df >= min_df)
        .collect();
    bigrams.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    bigrams.truncate(bigram_cap);

    if unigrams.is_empty() && bigrams.is_empty() {
        return Err(Error::Degenerate(
            "empty candidate set after filtering".into(),
        ));
    }

    Ok(Vocabulary {
        unigram_df: unigrams.iter().map(|(_, df)| *df).collect(),
        bigram_df: bigrams.iter().map(|(_, df)| *df).collect(),
        unigrams: unigrams.into_iter().map(|(u, _)| u.to_string()).collect(),
        bigrams: bigrams
            .into_iter()
            .map(|((a, b), _)| (a.to_string(), b.to_string()))
            .collect(),
        unigram_cap,
        bigram_cap,
    })
}

/// Sparse binary-presence feature vector plus the key-phrase position scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Strictly increasing indices of present vocabulary n-grams.
    pub indices: Vec<usize>,
    /// kp_index / token count, in [0,1].
    pub position: f64,
    pub label: Option<Label>,
}

/// Binary presence per vocabulary n-gram; out-of-vocabulary n-grams ignored.
pub fn vectorize(sequence: &TokenSequence, vocabulary: &Vocabulary) -> FeatureVector {
    let uni_index = vocabulary.unigram_index();
    let bi_index = vocabulary.bigram_index();
    let mut present: HashSet<usize> = HashSet::new();
    for token in &sequence.tokens {
        if let Some(&i) = uni_index.get(token.as_str()) {
            present.insert(i);
        }
    }
    for pair in sequence.tokens.windows(2) {
        if let Some(&i) = bi_index.get(&(pair[0].as_str(), pair[1].as_str())) {
            present.insert(i);
        }
    }
    let mut indices: Vec<usize> = present.into_iter().collect();
    indices.sort_unstable();
    FeatureVector {
        indices,
        position: sequence.kp_index as f64 / sequence.tokens.len().max(1) as f64,
        label: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str], kp: usize) -> TokenSequence {
        TokenSequence {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            kp_index: kp,
        }
    }

    #[test]
    fn preprocess_lowercases_and_strips() {
        let out = preprocess_text("Pt ABUSES Oxycodone 5mg!", 2).unwrap();
        assert_eq!(out.tokens, vec!["pt", "abuses", "oxycodone", "5mg"]);
        assert_eq!(out.kp_index, 2);
    }

    #[test]
    fn punctuation_only_tokens_dropped_and_kp_remapped() {
        let out = preprocess_text("— … (!!) then opioid use", 4).unwrap();
        assert_eq!(out.tokens, vec!["then", "opioid", "use"]);
        assert_eq!(out.kp_index, 1);
    }

    #[test]
    fn eliminated_key_phrase_is_an_error() {
        assert!(preprocess_text("foo ((( bar", 1).is_none());
    }

    #[test]
    fn preprocess_is_idempotent() {
        let once = preprocess_text("Pt's DOSE: 5mg!! of oxycodone (daily)", 4).unwrap();
        let again = preprocess_text(&once.tokens.join(" "), once.kp_index).unwrap();
        assert_eq!(once, again);
    }

    #[test]
    fn document_frequency_arithmetic() {
        let vocab = build_vocabulary(&[seq(&["a", "b"], 0), seq(&["a", "c"], 0)], 946, 474, 2)
            .unwrap();
        assert_eq!(vocab.unigrams, vec!["a"]);
        assert!(vocab.bigrams.is_empty());
    }

    #[test]
    fn digit_unigrams_excluded_letter_first_bigrams_kept() {
        let sequences = vec![
            seq(&["took", "5mg", "daily"], 0),
            seq(&["took", "5mg", "daily"], 0),
        ];
        let vocab = build_vocabulary(&sequences, 946, 474, 2).unwrap();
        assert!(!vocab.unigrams.contains(&"5mg".to_string()));
        assert!(vocab.unigrams.contains(&"took".to_string()));
        assert!(vocab
            .bigrams
            .contains(&("took".to_string(), "5mg".to_string())));
        assert!(!vocab
            .bigrams
            .iter()
            .any(|(a, _)| a == "5mg"));
    }

    #[test]
    fn caps_and_ranking_respected() {
        // c appears in 3 docs, a and b in 2: cap 2 keeps c then a (tie-break).
        let sequences = vec![
            seq(&["a", "c"], 0),
            seq(&["b", "c"], 0),
            seq(&["a", "b", "c"], 0),
        ];
        let vocab = build_vocabulary(&sequences, 2, 474, 2).unwrap();
        assert_eq!(vocab.unigrams, vec!["c", "a"]);
        assert_eq!(vocab.unigram_df, vec![3, 2]);
    }

    #[test]
    fn vectorize_binary_presence_and_position() {
        let vocab = build_vocabulary(
            &[seq(&["abuses", "oxycodone"], 0), seq(&["abuses", "oxycodone"], 0)],
            946,
            474,
            2,
        )
        .unwrap();
        let fv = vectorize(&seq(&["pt", "abuses", "oxycodone"], 2), &vocab);
        assert_eq!(fv.indices.len(), 3); // 2 unigrams + 1 bigram
        assert!((fv.position - 2.0 / 3.0).abs() < 1e-12);

        let repeated = vectorize(&seq(&["percocet", "percocet"], 0), &vocab);
        assert!(repeated.indices.is_empty()); // OOV ignored, presence not count
    }

    #[test]
    fn empty_vocab_overlap_leaves_position_only() {
        let vocab = build_vocabulary(&[seq(&["x", "y"], 0), seq(&["x", "y"], 0)], 946, 474, 2)
            .unwrap();
        let fv = vectorize(&seq(&["unrelated", "words"], 1), &vocab);
        assert!(fv.indices.is_empty());
        assert!((fv.position - 0.5).abs() < 1e-12);
    }

    #[test]
    fn built_vocabulary_satisfies_character_invariants() {
        let (corpus, _) = crate::corpus::generate_synthetic_corpus(
            2,
            30,
            &crate::corpus::SynthConfig::default(),
        )
        .unwrap();
        let lex = crate::lexicon::default_lexicon();
        let mut sequences = Vec::new();
        for note in &corpus.notes {
            for snippet in crate::lexicon::extract_snippets(note, &lex, 50) {
                sequences.push(preprocess(&snippet).unwrap());
            }
        }
        let vocab = build_vocabulary(&sequences, 946, 474, 2).unwrap();
        assert!(vocab.unigrams.iter().all(|u| all_letters(u)));
        for (a, b) in &vocab.bigrams {
            assert!(all_letters(a));
            assert!(b.bytes().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()));
        }
        assert!(vocab.unigrams.len() <= 946 && vocab.bigrams.len() <= 474);
    }
}
