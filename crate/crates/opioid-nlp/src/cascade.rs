//! End-to-end snippet classification (rules first, learned model for the
//! remainder) and aggregation to documents and patients.
//!
//! Only notes containing at least one key phrase are processed; everything
//! else is skipped before vectorization.

use crate::corpus::Corpus;
use crate::features;
use crate::learner::{self, LinearModel};
use crate::lexicon::{self, Lexicon, PhraseCategory, Snippet};
use crate::rules::{RuleCategory, RuleLibrary};
use crate::{Label, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Rule,
    MachineLearning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "detail")]
pub enum Detail {
    Rule {
        rule_id: String,
        category: RuleCategory,
    },
    MachineLearning {
        margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetClassification {
    pub snippet_id: String,
    pub note_id: String,
    pub patient_id: String,
    pub note_date: NaiveDate,
    pub note_type: String,
    pub key_phrase: String,
    pub key_phrase_category: PhraseCategory,
    pub label: Label,
    #[serde(flatten)]
    pub detail: Detail,
}

impl SnippetClassification {
    pub fn method(&self) -> Method {
        match self.detail {
            Detail::Rule { .. } => Method::Rule,
            Detail::MachineLearning { .. } => Method::MachineLearning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentClassification {
    pub note_id: String,
    pub positive: bool,
    pub positive_snippet_count: usize,
    pub total_snippet_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientNlpStatus {
    pub patient_id: String,
    pub nlp_positive: bool,
    pub positive_snippet_count: usize,
    pub first_positive_date: Option<NaiveDate>,
    pub drug_name_positive: bool,
    pub other_phrase_positive: bool,
}

/// Rule verdict when any category matches, otherwise the model's prediction
/// on the preprocessed, vectorized snippet.
pub fn classify_snippet(
    snippet: &Snippet,
    library: &RuleLibrary,
    model: &LinearModel,
) -> Result<SnippetClassification> {
    let (label, detail) = match crate::rules::classify_by_rules(&snippet.text, library) {
        Some(verdict) => (
            verdict.label,
            Detail::Rule {
                rule_id: verdict.matched_rule,
                category: verdict.matched_category,
            },
        ),
        None => {
            let sequence = features::preprocess(snippet)?;
            let vector = features::vectorize(&sequence, &model.vocabulary);
            let (label, margin) = learner::predict(model, &vector)?;
            (label, Detail::MachineLearning { margin })
        }
    };
    Ok(SnippetClassification {
        snippet_id: snippet.id(),
        note_id: snippet.note_id.clone(),
        patient_id: snippet.patient_id.clone(),
        note_date: snippet.note_date,
        note_type: snippet.note_type.clone(),
        key_phrase: snippet.key_phrase.text.clone(),
        key_phrase_category: snippet.key_phrase.category,
        label,
        detail,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ClassificationResults {
    /// Ordered by (note_id, source token index).
    pub snippets: Vec<SnippetClassification>,
    /// One entry per note containing at least one key phrase, by note_id.
    pub documents: Vec<DocumentClassification>,
    /// One entry per patient owning at least one classified snippet.
    pub patients: Vec<PatientNlpStatus>,
}

/// Classify every note containing a key phrase. `workers` > 1 splits notes
/// across threads; the merged output order is deterministic either way.
pub fn classify_corpus(
    corpus: &Corpus,
    lexicon: &Lexicon,
    library: &RuleLibrary,
    model: &LinearModel,
    window_radius: usize,
    workers: usize,
) -> Result<ClassificationResults> {
    let mut notes: Vec<&crate::corpus::NoteRecord> = corpus.notes.iter().collect();
    notes.sort_by(|a, b| a.note_id.cmp(&b.note_id));

    let classify_note =
        |note: &crate::corpus::NoteRecord| -> Result<Vec<SnippetClassification>> {
            lexicon::extract_snippets(note, lexicon, window_radius)
                .iter()
                .map(|snippet| classify_snippet(snippet, library, model))
                .collect()
        };

    let per_note: Vec<Vec<SnippetClassification>> = if workers > 1 && notes.len() > 1 {
        let chunk_size = notes.len().div_ceil(workers);
        let mut results: Vec<Option<Result<Vec<Vec<SnippetClassification>>>>> =
            (0..notes.len().div_ceil(chunk_size)).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in notes.chunks(chunk_size) {
                handles.push(scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|note| classify_note(note))
                        .collect::<Result<Vec<_>>>()
                }));
            }
            for (slot, handle) in results.iter_mut().zip(handles) {
                *slot = Some(handle.join().expect("worker panicked"));
            }
        });
        let mut merged = Vec::with_capacity(notes.len());
        for slot in results {
            merged.extend(slot.expect("all chunks processed")?);
        }
        merged
    } else {
        notes
            .iter()
            .map(|note| classify_note(note))
            .collect::<Result<Vec<_>>>()?
    };

    let mut results = ClassificationResults::default();
    let mut patient_acc: BTreeMap<String, PatientNlpStatus> = BTreeMap::new();
    for (note, classifications) in notes.iter().zip(per_note) {
        if classifications.is_empty() {
            continue; // no key phrases: the note is never classified
        }
        let positive_count = classifications
            .iter()
            .filter(|c| c.label == Label::Positive)
            .count();
        results.documents.push(DocumentClassification {
            note_id: note.note_id.clone(),
            positive: positive_count >= 1,
            positive_snippet_count: positive_count,
            total_snippet_count: classifications.len(),
        });
        for classification in classifications {
            let status = patient_acc
                .entry(classification.patient_id.clone())
                .or_insert_with(|| PatientNlpStatus {
                    patient_id: classification.patient_id.clone(),
                    nlp_positive: false,
                    positive_snippet_count: 0,
                    first_positive_date: None,
                    drug_name_positive: false,
                    other_phrase_positive: false,
                });
            if classification.label == Label::Positive {
                status.nlp_positive = true;
                status.positive_snippet_count += 1;
                status.first_positive_date = Some(match status.first_positive_date {
                    Some(d) => d.min(classification.note_date),
                    None => classification.note_date,
                });
                match classification.key_phrase_category {
                    PhraseCategory::SpecificDrugName => status.drug_name_positive = true,
                    PhraseCategory::OtherKeyPhrase => status.other_phrase_positive = true,
                }
            }
            results.snippets.push(classification);
        }
    }
    results.patients = patient_acc.into_values().collect();
    Ok(results)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReportCounts {
    pub total_notes: usize,
    pub total_snippets: usize,
    pub positive_snippets: usize,
    pub negative_snippets: usize,
    pub mean_snippets_per_note: f64,
}

/// Table-2-shaped counts. The mean is total snippets over classified notes;
/// an empty run reports 0.
pub fn classification_report(results: &ClassificationResults) -> ReportCounts {
    let total_snippets = results.snippets.len();
    let positive_snippets = results
        .snippets
        .iter()
        .filter(|s| s.label == Label::Positive)
        .count();
    let total_notes = results.documents.len();
    ReportCounts {
        total_notes,
        total_snippets,
        positive_snippets,
        negative_snippets: total_snippets - positive_snippets,
        mean_snippets_per_note: if total_notes == 0 {
            0.0
        } else {
            total_snippets as f64 / total_notes as f64
        },
    }
}
