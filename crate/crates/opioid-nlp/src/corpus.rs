//! Data model, JSONL ingestion/emission, validation, and synthetic corpus
//! generation.
//!
//! Record files are line-delimited JSON, one object per line. Dates are
//! ISO-8601 calendar dates; the pipeline operates at day granularity.

use crate::lexicon;
use crate::{Error, Group, Label, Result};
use chrono::{Datelike, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub note_id: String,
    pub patient_id: String,
    pub note_date: NaiveDate,
    pub note_type: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaritalStatus {
    Married,
    Divorced,
    NeverMarried,
    Widowed,
    Separated,
    MissingOther,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Race {
    BlackAfricanAmerican,
    White,
    Asian,
    NativeHawaiianPacIslander,
    AmericanIndianAlaskaNative,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    NotHispanicOrLatino,
    HispanicOrLatino,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_year: i32,
    pub gender: Gender,
    pub marital_status: MaritalStatus,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub cohort_entry_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeSystem {
    ICD9,
    ICD10,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisRecord {
    pub patient_id: String,
    pub code_system: CodeSystem,
    pub code: String,
    pub diagnosis_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrugClass {
    Opioid,
    Benzodiazepine,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrescriptionRecord {
    pub patient_id: String,
    pub drug_class: DrugClass,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    Outpatient,
    Inpatient,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub patient_id: String,
    pub encounter_date: NaiveDate,
    pub setting: Setting,
}

/// Immutable bundle of all five record collections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub notes: Vec<NoteRecord>,
    pub patients: Vec<PatientRecord>,
    pub diagnoses: Vec<DiagnosisRecord>,
    pub prescriptions: Vec<PrescriptionRecord>,
    pub encounters: Vec<EncounterRecord>,
}

#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub notes: PathBuf,
    pub patients: PathBuf,
    pub diagnoses: PathBuf,
    pub prescriptions: PathBuf,
    pub encounters: PathBuf,
}

impl CorpusPaths {
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            notes: dir.join("notes.jsonl"),
            patients: dir.join("patients.jsonl"),
            diagnoses: dir.join("diagnoses.jsonl"),
            prescriptions: dir.join("prescriptions.jsonl"),
            encounters: dir.join("encounters.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub notes: usize,
    pub patients: usize,
    pub diagnoses: usize,
    pub prescriptions: usize,
    pub encounters: usize,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Ingest and validate all five record files. `study_window` enforces the
/// note-date invariant when supplied.
pub fn ingest_corpus(
    paths: &CorpusPaths,
    study_window: Option<(NaiveDate, NaiveDate)>,
) -> Result<(Corpus, IngestReport)> {
    let corpus = Corpus {
        notes: read_jsonl(&paths.notes)?,
        patients: read_jsonl(&paths.patients)?,
        diagnoses: read_jsonl(&paths.diagnoses)?,
        prescriptions: read_jsonl(&paths.prescriptions)?,
        encounters: read_jsonl(&paths.encounters)?,
    };
    validate_corpus(&corpus, study_window)?;
    let report = IngestReport {
        notes: corpus.notes.len(),
        patients: corpus.patients.len(),
        diagnoses: corpus.diagnoses.len(),
        prescriptions: corpus.prescriptions.len(),
        encounters: corpus.encounters.len(),
    };
    Ok((corpus, report))
}

pub fn validate_corpus(
    corpus: &Corpus,
    study_window: Option<(NaiveDate, NaiveDate)>,
) -> Result<()> {
    let mut note_ids = HashSet::new();
    for note in &corpus.notes {
        if !note_ids.insert(note.note_id.as_str()) {
            return Err(Error::DuplicateKey {
                kind: "note_id",
                key: note.note_id.clone(),
            });
        }
        if note.text.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "note '{}' has empty text",
                note.note_id
            )));
        }
        if let Some((start, end)) = study_window {
            if note.note_date < start || note.note_date > end {
                return Err(Error::InvalidRecord(format!(
                    "note '{}' dated {} outside study window {start}..{end}",
                    note.note_id, note.note_date
                )));
            }
        }
    }
    let mut patient_ids = HashSet::new();
    for patient in &corpus.patients {
        if !patient_ids.insert(patient.patient_id.as_str()) {
            return Err(Error::DuplicateKey {
                kind: "patient_id",
                key: patient.patient_id.clone(),
            });
        }
    }
    for dx in &corpus.diagnoses {
        if dx.code.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "diagnosis for patient '{}' has empty code",
                dx.patient_id
            )));
        }
    }
    for rx in &corpus.prescriptions {
        if rx.end_date < rx.start_date {
            return Err(Error::InvalidRecord(format!(
                "prescription for patient '{}' ends {} before start {}",
                rx.patient_id, rx.end_date, rx.start_date
            )));
        }
    }
    Ok(())
}

pub fn emit_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = CorpusPaths::in_dir(dir);
    write_jsonl(&paths.notes, &corpus.notes)?;
    write_jsonl(&paths.patients, &corpus.patients)?;
    write_jsonl(&paths.diagnoses, &corpus.diagnoses)?;
    write_jsonl(&paths.prescriptions, &corpus.prescriptions)?;
    write_jsonl(&paths.encounters, &corpus.encounters)?;
    Ok(paths)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub patients: usize,
    pub notes: usize,
    pub diagnoses: usize,
    pub prescriptions: usize,
    pub encounters: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    CorpusStats {
        patients: corpus.patients.len(),
        notes: corpus.notes.len(),
        diagnoses: corpus.diagnoses.len(),
        prescriptions: corpus.prescriptions.len(),
        encounters: corpus.encounters.len(),
    }
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// Planted label for one key-phrase occurrence. `note_id` plus
/// `kp_source_token_index` identify the snippet the lexicon stage extracts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetTruth {
    pub note_id: String,
    pub patient_id: String,
    pub key_phrase: String,
    pub kp_source_token_index: usize,
    pub label: Label,
}

impl SnippetTruth {
    pub fn snippet_id(&self) -> String {
        format!("{}:{}", self.note_id, self.kp_source_token_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientTruth {
    pub patient_id: String,
    pub expected_group: Group,
    pub has_icd: bool,
    pub has_positive_passage: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub snippets: Vec<SnippetTruth>,
    pub patients: Vec<PatientTruth>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruthRecord {
    Snippet(SnippetTruth),
    Patient(PatientTruth),
}

impl GroundTruth {
    pub fn write(&self, path: &Path) -> Result<()> {
        let records: Vec<GroundTruthRecord> = self
            .snippets
            .iter()
            .cloned()
            .map(GroundTruthRecord::Snippet)
            .chain(self.patients.iter().cloned().map(GroundTruthRecord::Patient))
            .collect();
        write_jsonl(path, &records)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let records: Vec<GroundTruthRecord> = read_jsonl(path)?;
        let mut truth = GroundTruth::default();
        for record in records {
            match record {
                GroundTruthRecord::Snippet(s) => truth.snippets.push(s),
                GroundTruthRecord::Patient(p) => truth.patients.push(p),
            }
        }
        Ok(truth)
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Per-patient probability of having positive problematic-use passages.
    pub positive_note_rate: f64,
    /// Per-patient probability of a qualifying OUD diagnosis code.
    pub icd_rate: f64,
    /// Inclusive range of notes per patient.
    pub min_notes_per_patient: usize,
    pub max_notes_per_patient: usize,
    /// Among positive passages, fraction drawn from rule-matched templates
    /// (the rest fall through to the machine-learning stage).
    pub rule_positive_fraction: f64,
    pub study_start: NaiveDate,
    pub study_end: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            positive_note_rate: 0.3,
            icd_rate: 0.05,
            min_notes_per_patient: 2,
            max_notes_per_patient: 4,
            rule_positive_fraction: 0.6,
            study_start: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            study_end: NaiveDate::from_ymd_opt(2019, 12, 31).unwrap(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("positive_note_rate", self.positive_note_rate),
            ("icd_rate", self.icd_rate),
            ("rule_positive_fraction", self.rule_positive_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0,1], got {v}"
                )));
            }
        }
        if self.min_notes_per_patient == 0 || self.max_notes_per_patient < self.min_notes_per_patient
        {
            return Err(Error::InvalidConfig(
                "notes-per-patient range must be non-empty".into(),
            ));
        }
        if self.study_end < self.study_start {
            return Err(Error::InvalidConfig("study window is empty".into()));
        }
        Ok(())
    }
}

// Positive passages classified by the rule stage.
const RULE_POSITIVE: &[&str] = &[
    "problem list reviewed 4. low back pain 5. opioid dependence 6. hypertension",
    "opioid dependence (icd-9-cm 304.00) noted in the active problem list",
    "assessment: opioid use disorder moderate severity treatment options discussed",
    "[x] substance abuse and/or dependence endorsed on intake questionnaire",
    "patient continues to struggle with opiate abuse despite counseling sessions",
    "chart carries f11.20 opioid coding from prior admission note",
    "relapsed on opioid pain medication last month and is requesting a detox referral",
];

// Positive passages that match no rule and rely on the learned model.
const ML_POSITIVE: &[&str] = &[
    "patient reports taking extra {drug} beyond the prescribed amount when stress increases",
    "admits running out of {drug} early each month and borrowing pills from a friend",
    "reports using heroin when unable to get {drug} refilled through the clinic",
    "urine screen unexpectedly positive for opiate and patient could not explain the result",
    "strong concern for withdrawal after missed methadone dosing arranged outside the program",
    "enrolled in substance abuse treatment heroin last used yesterday per intake interview",
    "alludes to self medicating on the street and describes opiate withdrawal between refills",
    "reiterated that taking additional doses of opiate medication was a safety concern that would not be tolerated and the {drug} renewal was deferred",
];

// Negative passages classified by the rule stage.
const RULE_NEGATIVE: &[&str] = &[
    "former opioid dependence noted in past medical history review",
    "denies any opioid abuse and reports stable recovery at this visit",
    "family hx of substance abuse documented during social history review",
    "sister abuses hydrocodone per patient report with no personal use endorsed",
    "allergies: morphine codeine and sulfa drugs listed in the chart",
    "hydromorphone 4mg tab take one tablet every four hours when needed for pain",
    "demerol give: 0.5 mg ivp q2h prn for severe postoperative pain",
    "while taking percocet patient cannot drive or operate machinery and may cause drowsiness",
    "hx of opiate abuse documented previously with sustained sobriety since",
    "uds negative for opiate at this visit with stable regimen",
];

// Negative passages that match no rule and rely on the learned model.
const ML_NEGATIVE: &[&str] = &[
    "pt has pain mostly at night was on lorcet and tried to change to morphine but since she developed a rash the plan was revisited",
    "patient requested no lortab today and prefers ibuprofen for ongoing pain control",
    "continue tylenol and {drug} as needed per home regimen without change",
    "tolerating {drug} well with no adverse effects reported at this visit",
    "discussed tapering the fentanyl patch dose since pain scores have improved",
    "post surgical course uneventful and {drug} was discontinued at discharge without issue",
];

// Inter-passage padding: no key phrases, no rule matches, and long enough
// (> window radius tokens) that adjacent passages never share a window.
const PADDING: &[&str] = &[
    "patient seen in clinic today for routine follow up visit and interval history was obtained \
     in detail vital signs were reviewed and remain stable blood pressure heart rate and weight \
     are within expected limits sleep and appetite are unchanged from the prior visit patient \
     continues the home exercise program with good effect laboratory results from last week \
     were reviewed together and are within normal limits the care plan was discussed and the \
     patient verbalized understanding will follow up in three months or sooner if symptoms change",
    "reviewed current problem summary and updated the record accordingly patient ambulates \
     without assistance and reports steady energy levels through the day diet remains balanced \
     and hydration is adequate no new complaints were raised during the encounter counseling on \
     diet exercise and tobacco avoidance was provided immunizations are up to date preventive \
     screening was discussed and scheduling instructions were given the patient agreed with the \
     outlined plan and all questions were answered before the close of the visit today",
];

const DRUG_SLOTS: &[&str] = &[
    "oxycodone",
    "percocet",
    "vicodin",
    "hydrocodone",
    "morphine",
    "dilaudid",
    "oxycontin",
];

const NOTE_TYPES: &[&str] = &[
    "PRIMARY CARE NOTE",
    "MENTAL HEALTH NOTE",
    "EMERGENCY DEPT NOTE",
    "PAIN CLINIC NOTE",
    "SATP NOTE",
    "HOMELESS PROGRAM NOTE",
    "PHARMACY NOTE",
    "NURSING NOTE",
];

// (variable name, representative ICD-10 code, base rate, added rate when the
// patient has planted problematic use). Codes fall under the default
// comorbidity map prefixes.
const COMORBIDITIES: &[(&str, &str, f64, f64)] = &[
    ("Hypertension", "I10", 0.45, 0.10),
    ("Diabetes Mellitus", "E11.9", 0.20, 0.04),
    ("Depression", "F32.9", 0.20, 0.30),
    ("Post-Traumatic Stress Disorder", "F43.10", 0.11, 0.20),
    ("Cancer", "C50.9", 0.12, 0.00),
    ("Tobacco", "F17.210", 0.15, 0.25),
    ("Alcohol", "F10.20", 0.09, 0.25),
    ("Other Drug Addictions", "F14.20", 0.04, 0.25),
    ("Traumatic Brain Injury", "S06.0X0A", 0.04, 0.05),
    ("Anxiety", "F41.1", 0.14, 0.15),
    ("Neck Pain", "M54.2", 0.18, 0.15),
    ("Back Pain", "M54.5", 0.30, 0.20),
];

fn random_date(rng: &mut ChaCha8Rng, start: NaiveDate, end: NaiveDate) -> NaiveDate {
    let span = (end - start).num_days().max(0);
    start + chrono::Duration::days(rng.gen_range(0..=span))
}

fn fill_template(rng: &mut ChaCha8Rng, template: &str) -> String {
    if template.contains("{drug}") {
        template.replace("{drug}", DRUG_SLOTS.choose(rng).unwrap())
    } else {
        template.to_string()
    }
}

struct Passage {
    text: String,
    positive: bool,
}

/// Generate a deterministic corpus plus ground truth for a fixed
/// `(seed, config)`.
pub fn generate_synthetic_corpus(
    seed: u64,
    n_patients: usize,
    config: &SynthConfig,
) -> Result<(Corpus, GroundTruth)> {
    if n_patients == 0 {
        return Err(Error::InvalidConfig("n_patients must be >= 1".into()));
    }
    config.validate()?;
    let lexicon = lexicon::default_lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Corpus::default();
    let mut truth = GroundTruth::default();
    let mut note_counter = 0usize;

    for pi in 0..n_patients {
        let patient_id = format!("p{pi:06}");
        let entry_window_end =
            (config.study_start + chrono::Duration::days(365 * 2)).min(config.study_end);
        let entry = random_date(&mut rng, config.study_start, entry_window_end);
        let patient = PatientRecord {
            patient_id: patient_id.clone(),
            birth_year: entry.year() - rng.gen_range(22..=85),
            gender: if rng.gen_bool(0.85) {
                Gender::M
            } else {
                Gender::F
            },
            marital_status: *[
                MaritalStatus::Married,
                MaritalStatus::Married,
                MaritalStatus::Divorced,
                MaritalStatus::NeverMarried,
                MaritalStatus::Widowed,
                MaritalStatus::Separated,
                MaritalStatus::MissingOther,
            ]
            .choose(&mut rng)
            .unwrap(),
            race: *[
                Race::BlackAfricanAmerican,
                Race::BlackAfricanAmerican,
                Race::White,
                Race::White,
                Race::Asian,
                Race::NativeHawaiianPacIslander,
                Race::AmericanIndianAlaskaNative,
                Race::Unknown,
            ]
            .choose(&mut rng)
            .unwrap(),
            ethnicity: *[
                Ethnicity::NotHispanicOrLatino,
                Ethnicity::NotHispanicOrLatino,
                Ethnicity::NotHispanicOrLatino,
                Ethnicity::HispanicOrLatino,
                Ethnicity::Unknown,
            ]
            .choose(&mut rng)
            .unwrap(),
            cohort_entry_date: entry,
        };

        let has_positive = rng.gen_bool(config.positive_note_rate);
        let has_icd = rng.gen_bool(config.icd_rate);

        if has_icd {
            let (system, code) = *[
                (CodeSystem::ICD9, "304.00"),
                (CodeSystem::ICD9, "304.70"),
                (CodeSystem::ICD9, "305.50"),
                (CodeSystem::ICD10, "F11.20"),
                (CodeSystem::ICD10, "F11.10"),
                (CodeSystem::ICD10, "F11.90"),
            ]
            .choose(&mut rng)
            .unwrap();
            corpus.diagnoses.push(DiagnosisRecord {
                patient_id: patient_id.clone(),
                code_system: system,
                code: code.to_string(),
                diagnosis_date: random_date(&mut rng, entry, config.study_end),
            });
        }

        let problematic = has_positive || has_icd;
        for &(_, code, base, boost) in COMORBIDITIES {
            let rate = base + if problematic { boost } else { 0.0 };
            if rng.gen_bool(rate.min(1.0)) {
                corpus.diagnoses.push(DiagnosisRecord {
                    patient_id: patient_id.clone(),
                    code_system: CodeSystem::ICD10,
                    code: code.to_string(),
                    diagnosis_date: random_date(&mut rng, entry, config.study_end),
                });
            }
        }

        let opioid_rx_rate = if problematic { 0.75 } else { 0.35 };
        let mut opioid_interval = None;
        if rng.gen_bool(opioid_rx_rate) {
            let start = random_date(&mut rng, entry, config.study_end);
            let end = (start + chrono::Duration::days(rng.gen_range(14..=180)))
                .min(config.study_end);
            opioid_interval = Some((start, end));
            corpus.prescriptions.push(PrescriptionRecord {
                patient_id: patient_id.clone(),
                drug_class: DrugClass::Opioid,
                start_date: start,
                end_date: end,
            });
        }
        let benzo_rate = if has_icd { 0.30 } else { 0.08 };
        if rng.gen_bool(benzo_rate) {
            let (start, end) = match opioid_interval {
                // usually overlapping the opioid interval
                Some((os, oe)) if rng.gen_bool(0.8) => (os, oe),
                _ => {
                    let s = random_date(&mut rng, entry, config.study_end);
                    (s, (s + chrono::Duration::days(30)).min(config.study_end))
                }
            };
            corpus.prescriptions.push(PrescriptionRecord {
                patient_id: patient_id.clone(),
                drug_class: DrugClass::Benzodiazepine,
                start_date: start,
                end_date: end,
            });
        }

        let encounter_count = if has_icd {
            rng.gen_range(20..=80)
        } else if has_positive {
            rng.gen_range(10..=50)
        } else {
            rng.gen_range(2..=30)
        };
        for _ in 0..encounter_count {
            corpus.encounters.push(EncounterRecord {
                patient_id: patient_id.clone(),
                encounter_date: random_date(&mut rng, entry, config.study_end),
                setting: if rng.gen_bool(0.85) {
                    Setting::Outpatient
                } else {
                    Setting::Inpatient
                },
            });
        }

        // Notes: distribute passages over the patient's notes. Positive
        // patients get 1-3 positive passages; every note also carries 0-2
        // negative key-phrase passages.
        let n_notes = rng.gen_range(config.min_notes_per_patient..=config.max_notes_per_patient);
        let mut positive_budget = if has_positive { rng.gen_range(1..=3) } else { 0 };
        for ni in 0..n_notes {
            let mut passages: Vec<Passage> = Vec::new();
            let notes_left = n_notes - ni;
            if positive_budget > 0 && (rng.gen_bool(0.6) || notes_left <= positive_budget) {
                let take = if notes_left == 1 { positive_budget } else { 1 };
                for _ in 0..take {
                    let template = if rng.gen_bool(config.rule_positive_fraction) {
                        RULE_POSITIVE.choose(&mut rng).unwrap()
                    } else {
                        ML_POSITIVE.choose(&mut rng).unwrap()
                    };
                    passages.push(Passage {
                        text: fill_template(&mut rng, template),
                        positive: true,
                    });
                }
                positive_budget -= take;
            }
            for _ in 0..rng.gen_range(0..=2usize) {
                let template = if rng.gen_bool(0.5) {
                    RULE_NEGATIVE.choose(&mut rng).unwrap()
                } else {
                    ML_NEGATIVE.choose(&mut rng).unwrap()
                };
                passages.push(Passage {
                    text: fill_template(&mut rng, template),
                    positive: false,
                });
            }
            passages.shuffle(&mut rng);

            let note_id = format!("n{note_counter:08}");
            note_counter += 1;
            let note_type = if passages.iter().any(|p| p.positive) && rng.gen_bool(0.5) {
                *["SATP NOTE", "PAIN CLINIC NOTE", "MENTAL HEALTH NOTE"]
                    .choose(&mut rng)
                    .unwrap()
            } else {
                NOTE_TYPES.choose(&mut rng).unwrap()
            };

            // Assemble: padding | passage | padding | ... | padding, tracking
            // per-passage token ranges so every extracted snippet can be
            // labeled by the passage that contains its key phrase.
            let mut text = String::new();
            let mut token_cursor = 0usize;
            let mut ranges: Vec<(usize, usize, bool)> = Vec::new();
            let push_block = |text: &mut String, cursor: &mut usize, block: &str| {
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(block);
                let count = block.split_whitespace().count();
                let start = *cursor;
                *cursor += count;
                start
            };
            let pad = PADDING.choose(&mut rng).unwrap();
            push_block(&mut text, &mut token_cursor, pad);
            for passage in &passages {
                let start = push_block(&mut text, &mut token_cursor, &passage.text);
                ranges.push((start, token_cursor, passage.positive));
                let pad = PADDING.choose(&mut rng).unwrap();
                push_block(&mut text, &mut token_cursor, pad);
            }

            let note = NoteRecord {
                note_id: note_id.clone(),
                patient_id: patient_id.clone(),
                note_date: random_date(&mut rng, entry, config.study_end),
                note_type: note_type.to_string(),
                text,
            };
            // Ground truth for every key-phrase occurrence the lexicon
            // stage will extract.
            let tokens = lexicon::raw_tokens(&note.text);
            for m in lexicon::find_in_tokens(&tokens, &lexicon) {
                let positive = ranges
                    .iter()
                    .find(|(s, e, _)| m.token_index >= *s && m.token_index < *e)
                    .map(|(_, _, p)| *p)
                    .unwrap_or(false);
                truth.snippets.push(SnippetTruth {
                    note_id: note_id.clone(),
                    patient_id: patient_id.clone(),
                    key_phrase: lexicon.phrases()[m.phrase_index].text.clone(),
                    kp_source_token_index: m.token_index,
                    label: if positive { Label::Positive } else { Label::Negative },
                });
            }
            corpus.notes.push(note);
        }

        truth.patients.push(PatientTruth {
            patient_id: patient_id.clone(),
            expected_group: if has_icd {
                Group::AllIcd
            } else if has_positive {
                Group::NlpOnly
            } else {
                Group::NoProblematic
            },
            has_icd,
            has_positive_passage: has_positive,
        });
        corpus.patients.push(patient);
    }

    Ok((corpus, truth))
}
