//! Pipeline CLI: synth, extract, train, classify, evaluate, cohort, report.
//!
//! Progress goes to stderr; machine-readable artifacts go to files under the
//! subcommand's --out directory, each run alongside a reproducibility
//! manifest. Exit codes: 0 success/gate pass, 1 gate fail, 2 usage or
//! configuration error, 3 data error.

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use opioid_nlp::cascade::{self, ClassificationResults, DocumentClassification, SnippetClassification};
use opioid_nlp::cohort::{self, EncounterOrigin, GroupAssignment, GroupSummary, IcdCodeSet};
use opioid_nlp::corpus::{self, CorpusPaths, GroundTruth, SynthConfig};
use opioid_nlp::features::{self, TokenSequence};
use opioid_nlp::learner::{self, Hyperparameters};
use opioid_nlp::lexicon::{self, Lexicon, Snippet};
use opioid_nlp::metrics::{self, DEFAULT_GATE_THRESHOLD};
use opioid_nlp::rules::{self, RuleLibrary};
use opioid_nlp::{Error, Group, Label, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "opioid-nlp", version, about = "Problematic-opioid-use note classification pipeline")]
struct Cli {
    /// Key=value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with per-snippet ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1200)]
        patients: usize,
    },
    /// Extract key-phrase snippets from a corpus.
    Extract {
        /// Directory holding the corpus JSONL files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the linear stage on labeled snippets.
    Train {
        /// snippets.jsonl from `extract`.
        #[arg(long)]
        snippets: PathBuf,
        /// ground_truth.jsonl from `synth` (or hand labeling).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the ranked vocabulary with document frequencies.
        #[arg(long)]
        dump_vocab: bool,
        /// Train on every labeled snippet instead of only rule-silent ones.
        #[arg(long)]
        all_snippets: bool,
    },
    /// Run the full cascade over a corpus.
    Classify {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also write every matching rule per snippet (audit aid).
        #[arg(long)]
        explain: bool,
    },
    /// Score cascade predictions against ground truth; exit 1 on gate fail.
    Evaluate {
        /// snippets.jsonl from `classify`.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Gate threshold for all four metrics.
        #[arg(long)]
        gate: Option<f64>,
    },
    /// Assign patient groups and build the comparison tables.
    Cohort {
        #[arg(long)]
        corpus: PathBuf,
        /// patients.jsonl from `classify`.
        #[arg(long)]
        nlp_patients: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["index", "entry"])]
        encounter_origin: Option<String>,
    },
    /// Snippet/positive-note summary tables.
    Report {
        /// snippets.jsonl from `classify`.
        #[arg(long)]
        snippets: PathBuf,
        /// patients.jsonl from `classify`.
        #[arg(long)]
        nlp_patients: PathBuf,
        /// assignments.jsonl from `cohort`.
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct RunConfig {
    window_radius: usize,
    unigram_cap: usize,
    bigram_cap: usize,
    train_fraction: f64,
    seed: u64,
    gate: f64,
    lambda: f64,
    epochs: usize,
    study_start: Option<NaiveDate>,
    study_end: Option<NaiveDate>,
    lexicon: Option<PathBuf>,
    rules: Option<PathBuf>,
    comorbidity_map: Option<PathBuf>,
    encounter_origin: EncounterOrigin,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_radius: 50,
            unigram_cap: 946,
            bigram_cap: 474,
            train_fraction: 0.8,
            seed: 0,
            gate: DEFAULT_GATE_THRESHOLD,
            lambda: 1e-4,
            epochs: 20,
            study_start: None,
            study_end: None,
            lexicon: None,
            rules: None,
            comorbidity_map: None,
            encounter_origin: EncounterOrigin::Index,
        }
    }
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = RunConfig::default();
        let Some(path) = path else { return Ok(config) };
        let source = std::fs::read_to_string(path)?;
        for (lineno, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg,
            };
            match key {
                "window_radius" => config.window_radius = value.parse().map_err(|e| bad(format!("{e}")))?,
                "unigram_cap" => config.unigram_cap = value.parse().map_err(|e| bad(format!("{e}")))?,
                "bigram_cap" => config.bigram_cap = value.parse().map_err(|e| bad(format!("{e}")))?,
                "train_fraction" => config.train_fraction = value.parse().map_err(|e| bad(format!("{e}")))?,
                "seed" => config.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
                "gate" => config.gate = value.parse().map_err(|e| bad(format!("{e}")))?,
                "lambda" => config.lambda = value.parse().map_err(|e| bad(format!("{e}")))?,
                "epochs" => config.epochs = value.parse().map_err(|e| bad(format!("{e}")))?,
                "study_start" => config.study_start = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "study_end" => config.study_end = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "lexicon" => config.lexicon = Some(PathBuf::from(value)),
                "rules" => config.rules = Some(PathBuf::from(value)),
                "comorbidity_map" => config.comorbidity_map = Some(PathBuf::from(value)),
                "encounter_origin" => {
                    config.encounter_origin = match value {
                        "index" => EncounterOrigin::Index,
                        "entry" => EncounterOrigin::Entry,
                        other => return Err(bad(format!("unknown encounter_origin '{other}'"))),
                    }
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.window_radius == 0 {
            return Err(Error::InvalidConfig("window_radius must be positive".into()));
        }
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must be in (0,1)".into()));
        }
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::InvalidConfig("gate must be in [0,1]".into()));
        }
        if self.lambda <= 0.0 || self.epochs == 0 {
            return Err(Error::InvalidConfig("lambda and epochs must be positive".into()));
        }
        if let (Some(start), Some(end)) = (self.study_start, self.study_end) {
            if end < start {
                return Err(Error::InvalidConfig("study_end before study_start".into()));
            }
        }
        Ok(())
    }

    fn study_window(&self) -> Option<(NaiveDate, NaiveDate)> {
        match (self.study_start, self.study_end) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    /// Deterministic rendering used for the manifest and its hash. Paths are
    /// reduced to file names so identical runs in different directories
    /// produce identical manifests.
    fn render(&self) -> String {
        let opt_date = |d: Option<NaiveDate>| d.map_or("none".to_string(), |d| d.to_string());
        let opt_name = |p: &Option<PathBuf>| {
            p.as_deref()
                .map_or("builtin".to_string(), |p| file_name(p))
        };
        let mut s = String::new();
        let _ = writeln!(s, "window_radius = {}", self.window_radius);
        let _ = writeln!(s, "unigram_cap = {}", self.unigram_cap);
        let _ = writeln!(s, "bigram_cap = {}", self.bigram_cap);
        let _ = writeln!(s, "train_fraction = {}", self.train_fraction);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "gate = {}", self.gate);
        let _ = writeln!(s, "lambda = {:e}", self.lambda);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "study_start = {}", opt_date(self.study_start));
        let _ = writeln!(s, "study_end = {}", opt_date(self.study_end));
        let _ = writeln!(s, "lexicon = {}", opt_name(&self.lexicon));
        let _ = writeln!(s, "rules = {}", opt_name(&self.rules));
        let _ = writeln!(s, "comorbidity_map = {}", opt_name(&self.comorbidity_map));
        let _ = writeln!(
            s,
            "encounter_origin = {}",
            match self.encounter_origin {
                EncounterOrigin::Index => "index",
                EncounterOrigin::Entry => "entry",
            }
        );
        s
    }

    fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(path) => lexicon::load_lexicon(path),
            None => Ok(lexicon::default_lexicon()),
        }
    }

    fn rules(&self) -> Result<RuleLibrary> {
        match &self.rules {
            Some(path) => rules::load_rule_library(path),
            None => Ok(rules::default_rule_library()),
        }
    }

    fn comorbidity_map(&self) -> Result<cohort::ComorbidityMap> {
        match &self.comorbidity_map {
            Some(path) => cohort::load_comorbidity_map(path),
            None => Ok(cohort::default_comorbidity_map()),
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest and small output helpers
// ---------------------------------------------------------------------------

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    config: &RunConfig,
    inputs: &[&Path],
) -> Result<()> {
    let rendered = config.render();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "subcommand: {subcommand}");
    let _ = writeln!(manifest, "config_sha256: {}", sha256_hex(rendered.as_bytes()));
    let mut lines: Vec<String> = Vec::new();
    for path in inputs {
        lines.push(format!("input: {} {}", file_name(path), sha256_file(path)?));
    }
    lines.sort();
    for line in lines {
        let _ = writeln!(manifest, "{line}");
    }
    manifest.push_str("--- config ---\n");
    manifest.push_str(&rendered);
    std::fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Minimal CSV quoting: wrap fields containing commas or quotes.
fn csv_row(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| {
            if f.contains(',') || f.contains('"') {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", csv_row(row));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn group_slug(group: Group) -> &'static str {
    match group {
        Group::AllIcd => "all_icd",
        Group::NlpOnly => "nlp_only",
        Group::NoProblematic => "no_problematic",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |v| format!("{v:.6}"))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_synth(config: &RunConfig, out: &Path, patients: usize) -> Result<i32> {
    let mut synth = SynthConfig::default();
    if let Some((start, end)) = config.study_window() {
        synth.study_start = start;
        synth.study_end = end;
    }
    let started = Instant::now();
    let (corpus, truth) = corpus::generate_synthetic_corpus(config.seed, patients, &synth)?;
    std::fs::create_dir_all(out)?;
    corpus::emit_corpus(&corpus, out)?;
    truth.write(&out.join("ground_truth.jsonl"))?;
    write_manifest(out, "synth", config, &[])?;
    let stats = corpus::corpus_stats(&corpus);
    eprintln!(
        "synth: {} patients, {} notes, {} snippet truths in {:.2}s",
        stats.patients,
        stats.notes,
        truth.snippets.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn cmd_extract(config: &RunConfig, corpus_dir: &Path, out: &Path) -> Result<i32> {
    let paths = CorpusPaths::in_dir(corpus_dir);
    let (corpus, report) = corpus::ingest_corpus(&paths, config.study_window())?;
    let lexicon = config.lexicon()?;
    let started = Instant::now();
    let mut notes: Vec<&corpus::NoteRecord> = corpus.notes.iter().collect();
    notes.sort_by(|a, b| a.note_id.cmp(&b.note_id));
    let mut snippets: Vec<Snippet> = Vec::new();
    for note in notes {
        snippets.extend(lexicon::extract_snippets(note, &lexicon, config.window_radius));
    }
    let elapsed = started.elapsed().as_secs_f64();
    std::fs::create_dir_all(out)?;
    corpus::write_jsonl(&out.join("snippets.jsonl"), &snippets)?;
    let mut inputs: Vec<&Path> = vec![
        &paths.notes,
        &paths.patients,
        &paths.diagnoses,
        &paths.prescriptions,
        &paths.encounters,
    ];
    if let Some(lex) = &config.lexicon {
        inputs.push(lex);
    }
    write_manifest(out, "extract", config, &inputs)?;
    eprintln!(
        "extract: {} notes -> {} snippets in {elapsed:.2}s ({:.0} notes/s)",
        report.notes,
        snippets.len(),
        report.notes as f64 / elapsed.max(1e-9)
    );
    Ok(0)
}

struct LabeledSequence {
    snippet_id: String,
    sequence: TokenSequence,
    label: Label,
}

fn cmd_train(
    config: &RunConfig,
    snippets_path: &Path,
    truth_path: &Path,
    out: &Path,
    dump_vocab: bool,
    all_snippets: bool,
) -> Result<i32> {
    let snippets: Vec<Snippet> = corpus::read_jsonl(snippets_path)?;
    let truth = GroundTruth::read(truth_path)?;
    let labels: HashMap<String, Label> = truth
        .snippets
        .iter()
        .map(|t| (t.snippet_id(), t.label))
        .collect();
    let library = config.rules()?;

    let mut items: Vec<LabeledSequence> = Vec::new();
    let mut unlabeled = 0usize;
    let mut rule_matched = 0usize;
    let mut eliminated = 0usize;
    for snippet in &snippets {
        let Some(&label) = labels.get(&snippet.id()) else {
            unlabeled += 1;
            continue;
        };
        if !all_snippets && rules::classify_by_rules(&snippet.text, &library).is_some() {
            rule_matched += 1;
            continue;
        }
        match features::preprocess(snippet) {
            Ok(sequence) => items.push(LabeledSequence {
                snippet_id: snippet.id(),
                sequence,
                label,
            }),
            Err(Error::KeyPhraseEliminated(_)) => eliminated += 1,
            Err(e) => return Err(e),
        }
    }
    if unlabeled + rule_matched + eliminated > 0 {
        eprintln!(
            "train: skipped {unlabeled} unlabeled, {rule_matched} rule-matched, {eliminated} eliminated snippets"
        );
    }

    let item_labels: Vec<Label> = items.iter().map(|i| i.label).collect();
    let (train_idx, test_idx) =
        learner::split_indices(&item_labels, config.train_fraction, config.seed)?;
    let train_sequences: Vec<TokenSequence> = train_idx
        .iter()
        .map(|&i| items[i].sequence.clone())
        .collect();
    let vocabulary = features::build_vocabulary(
        &train_sequences,
        config.unigram_cap,
        config.bigram_cap,
        2,
    )?;
    let vectorize_set = |idx: &[usize]| -> Vec<features::FeatureVector> {
        idx.iter()
            .map(|&i| {
                let mut v = features::vectorize(&items[i].sequence, &vocabulary);
                v.label = Some(items[i].label);
                v
            })
            .collect()
    };
    let train_set = vectorize_set(&train_idx);
    let test_set = vectorize_set(&test_idx);

    let hp = Hyperparameters {
        lambda: config.lambda,
        epochs: config.epochs,
        seed: config.seed,
    };
    let started = Instant::now();
    let outcome = learner::train(&train_set, vocabulary, hp)?;
    std::fs::create_dir_all(out)?;
    learner::save_model(&outcome.model, &out.join("model.txt"))?;

    let mut split = String::new();
    for &i in &train_idx {
        let _ = writeln!(split, "train\t{}", items[i].snippet_id);
    }
    for &i in &test_idx {
        let _ = writeln!(split, "test\t{}", items[i].snippet_id);
    }
    std::fs::write(out.join("split.tsv"), split)?;

    if dump_vocab {
        let vocab = &outcome.model.vocabulary;
        let mut dump = String::from("kind\tngram\tdf\n");
        for (u, df) in vocab.unigrams.iter().zip(&vocab.unigram_df) {
            let _ = writeln!(dump, "unigram\t{u}\t{df}");
        }
        for ((a, b), df) in vocab.bigrams.iter().zip(&vocab.bigram_df) {
            let _ = writeln!(dump, "bigram\t{a} {b}\t{df}");
        }
        std::fs::write(out.join("vocab.tsv"), dump)?;
    }
    write_manifest(out, "train", config, &[snippets_path, truth_path])?;

    // held-out sanity line on the linear stage alone
    let mut correct = 0usize;
    for v in &test_set {
        let (label, _) = learner::predict(&outcome.model, v)?;
        if Some(label) == v.label {
            correct += 1;
        }
    }
    eprintln!(
        "train: {} train / {} test vectors, final objective {:.6}, held-out ML accuracy {:.1}%, {:.2}s",
        train_set.len(),
        test_set.len(),
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        100.0 * correct as f64 / test_set.len().max(1) as f64,
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

#[derive(Serialize)]
struct Explanation {
    snippet_id: String,
    matched_rules: Vec<String>,
}

fn cmd_classify(
    config: &RunConfig,
    corpus_dir: &Path,
    model_path: &Path,
    out: &Path,
    workers: usize,
    explain: bool,
) -> Result<i32> {
    let paths = CorpusPaths::in_dir(corpus_dir);
    let (corpus, _) = corpus::ingest_corpus(&paths, config.study_window())?;
    let model = learner::load_model(model_path)?;
    let lexicon = config.lexicon()?;
    let library = config.rules()?;
    let started = Instant::now();
    let results = cascade::classify_corpus(
        &corpus,
        &lexicon,
        &library,
        &model,
        config.window_radius,
        workers.max(1),
    )?;
    let elapsed = started.elapsed().as_secs_f64();
    std::fs::create_dir_all(out)?;
    corpus::write_jsonl(&out.join("snippets.jsonl"), &results.snippets)?;
    corpus::write_jsonl(&out.join("documents.jsonl"), &results.documents)?;
    corpus::write_jsonl(&out.join("patients.jsonl"), &results.patients)?;

    if explain {
        let mut explanations = Vec::new();
        let mut notes: Vec<&corpus::NoteRecord> = corpus.notes.iter().collect();
        notes.sort_by(|a, b| a.note_id.cmp(&b.note_id));
        for note in notes {
            for snippet in lexicon::extract_snippets(note, &lexicon, config.window_radius) {
                explanations.push(Explanation {
                    snippet_id: snippet.id(),
                    matched_rules: rules::explain_rules(&snippet.text, &library)
                        .iter()
                        .map(|r| r.rule_id.clone())
                        .collect(),
                });
            }
        }
        corpus::write_jsonl(&out.join("explain.jsonl"), &explanations)?;
    }

    let inputs: Vec<&Path> = vec![
        &paths.notes,
        &paths.patients,
        &paths.diagnoses,
        &paths.prescriptions,
        &paths.encounters,
        model_path,
    ];
    write_manifest(out, "classify", config, &inputs)?;
    eprintln!(
        "classify: {} snippets over {} notes in {elapsed:.2}s ({:.0} snippets/s)",
        results.snippets.len(),
        results.documents.len(),
        results.snippets.len() as f64 / elapsed.max(1e-9)
    );
    Ok(0)
}

fn cmd_evaluate(
    config: &RunConfig,
    predictions_path: &Path,
    truth_path: &Path,
    out: &Path,
    gate_flag: Option<f64>,
) -> Result<i32> {
    let predictions: Vec<SnippetClassification> = corpus::read_jsonl(predictions_path)?;
    let truth = GroundTruth::read(truth_path)?;
    let gate = gate_flag.unwrap_or(config.gate);

    let predicted_by_id: HashMap<&str, Label> = predictions
        .iter()
        .map(|p| (p.snippet_id.as_str(), p.label))
        .collect();
    let mut gold: Vec<(String, Label)> = truth
        .snippets
        .iter()
        .map(|t| (t.snippet_id(), t.label))
        .collect();
    gold.sort_by(|a, b| a.0.cmp(&b.0));
    let mut predicted = Vec::with_capacity(gold.len());
    for (id, _) in &gold {
        let label = predicted_by_id.get(id.as_str()).ok_or_else(|| {
            Error::InvalidRecord(format!("no prediction for labeled snippet '{id}'"))
        })?;
        predicted.push((id.clone(), *label));
    }
    let matrix = metrics::confusion(&predicted, &gold)?;
    let report = metrics::compute_metrics(&matrix, gate);

    std::fs::create_dir_all(out)?;
    let rows = vec![
        vec!["tp".to_string(), matrix.tp.to_string()],
        vec!["fp".to_string(), matrix.fp.to_string()],
        vec!["fn".to_string(), matrix.fn_.to_string()],
        vec!["tn".to_string(), matrix.tn.to_string()],
        vec!["precision".to_string(), opt(report.precision)],
        vec!["recall".to_string(), opt(report.recall)],
        vec!["specificity".to_string(), opt(report.specificity)],
        vec!["accuracy".to_string(), opt(report.accuracy)],
        vec!["gate_threshold".to_string(), format!("{gate:.6}")],
        vec!["gate_passed".to_string(), report.gate_passed.to_string()],
    ];
    write_csv(&out.join("metrics.csv"), &["metric", "value"], &rows)?;
    write_manifest(out, "evaluate", config, &[predictions_path, truth_path])?;
    eprintln!(
        "evaluate: {} snippets, precision {} recall {} specificity {} accuracy {} -> gate {}",
        matrix.total(),
        opt(report.precision),
        opt(report.recall),
        opt(report.specificity),
        opt(report.accuracy),
        if report.gate_passed { "PASS" } else { "FAIL" }
    );
    Ok(if report.gate_passed { 0 } else { 1 })
}

fn summary_cell(summary: &GroupSummary) -> String {
    match summary {
        GroupSummary::Proportion { count, total, proportion } => {
            format!("{count}/{total} ({:.1}%)", 100.0 * proportion)
        }
        GroupSummary::MeanSd { mean, sd, n } => format!("{mean:.2} ({sd:.2}) n={n}"),
    }
}

fn comparison_rows(tables: &[cohort::ComparisonTable], clinical: bool) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for table in tables {
        let side = if clinical {
            &table.clinical_rows
        } else {
            &table.demographic_rows
        };
        for row in side {
            rows.push(vec![
                format!("{} vs {}", group_slug(table.left_group), group_slug(table.right_group)),
                row.variable.clone(),
                row.level.clone().unwrap_or_default(),
                summary_cell(&row.left),
                summary_cell(&row.right),
                row.p_value.map_or("NA".to_string(), cohort::format_p_value),
                opt(row.asd_percent),
                row.imbalanced.to_string(),
            ]);
        }
    }
    rows
}

fn cmd_cohort(
    config: &RunConfig,
    corpus_dir: &Path,
    nlp_patients_path: &Path,
    out: &Path,
    origin_flag: Option<&str>,
) -> Result<i32> {
    let paths = CorpusPaths::in_dir(corpus_dir);
    let (corpus, _) = corpus::ingest_corpus(&paths, config.study_window())?;
    let statuses: Vec<cascade::PatientNlpStatus> = corpus::read_jsonl(nlp_patients_path)?;
    let origin = match origin_flag {
        Some("index") => EncounterOrigin::Index,
        Some("entry") => EncounterOrigin::Entry,
        Some(other) => return Err(Error::InvalidConfig(format!("unknown origin '{other}'"))),
        None => config.encounter_origin,
    };

    let icd_dates = cohort::flag_icd_oud(&corpus.diagnoses, &IcdCodeSet::default(), config.study_window())?;
    let patient_ids: Vec<String> = corpus.patients.iter().map(|p| p.patient_id.clone()).collect();
    let assignments = cohort::assign_groups(&patient_ids, &statuses, &icd_dates)?;

    // hard partition identities; a violation is a data error
    let count = |g: Group| assignments.iter().filter(|a| a.group == g).count();
    let nlp_icd = assignments.iter().filter(|a| a.nlp_icd_member).count();
    let nlp_positive = statuses.iter().filter(|s| s.nlp_positive).count();
    if count(Group::AllIcd) + count(Group::NlpOnly) + count(Group::NoProblematic) != assignments.len()
        || nlp_positive != count(Group::NlpOnly) + nlp_icd
    {
        return Err(Error::InvalidRecord("group partition identity violated".into()));
    }

    let map = config.comorbidity_map()?;
    let variables = cohort::derive_variables(&corpus, &assignments, &map, origin)?;
    let tables = cohort::build_comparison_tables(&variables, &map)?;

    std::fs::create_dir_all(out)?;
    corpus::write_jsonl(&out.join("assignments.jsonl"), &assignments)?;
    let header = ["comparison", "variable", "level", "left", "right", "p_value", "asd_percent", "imbalanced"];
    write_csv(&out.join("table4.csv"), &header, &comparison_rows(&tables, false))?;
    write_csv(&out.join("table5.csv"), &header, &comparison_rows(&tables, true))?;
    let inputs: Vec<&Path> = vec![
        &paths.notes,
        &paths.patients,
        &paths.diagnoses,
        &paths.prescriptions,
        &paths.encounters,
        nlp_patients_path,
    ];
    write_manifest(out, "cohort", config, &inputs)?;
    eprintln!(
        "cohort: {} patients -> {} all-icd ({} nlp+icd), {} nlp-only, {} no-problematic",
        assignments.len(),
        count(Group::AllIcd),
        nlp_icd,
        count(Group::NlpOnly),
        count(Group::NoProblematic)
    );
    Ok(0)
}

fn cmd_report(
    config: &RunConfig,
    snippets_path: &Path,
    nlp_patients_path: &Path,
    assignments_path: &Path,
    out: &Path,
) -> Result<i32> {
    let snippets: Vec<SnippetClassification> = corpus::read_jsonl(snippets_path)?;
    let statuses: Vec<cascade::PatientNlpStatus> = corpus::read_jsonl(nlp_patients_path)?;
    let assignments: Vec<GroupAssignment> = corpus::read_jsonl(assignments_path)?;

    // rebuild per-document tallies from the snippet stream
    let mut documents: Vec<DocumentClassification> = Vec::new();
    for snippet in &snippets {
        match documents.last_mut() {
            Some(doc) if doc.note_id == snippet.note_id => {
                doc.total_snippet_count += 1;
                if snippet.label == Label::Positive {
                    doc.positive_snippet_count += 1;
                    doc.positive = true;
                }
            }
            _ => documents.push(DocumentClassification {
                note_id: snippet.note_id.clone(),
                positive: snippet.label == Label::Positive,
                positive_snippet_count: (snippet.label == Label::Positive) as usize,
                total_snippet_count: 1,
            }),
        }
    }
    let results = ClassificationResults {
        snippets,
        documents,
        patients: statuses.clone(),
    };
    let report = cascade::classification_report(&results);
    std::fs::create_dir_all(out)?;
    write_csv(
        &out.join("report.csv"),
        &["metric", "value"],
        &[
            vec!["total_notes".to_string(), report.total_notes.to_string()],
            vec!["total_snippets".to_string(), report.total_snippets.to_string()],
            vec!["positive_snippets".to_string(), report.positive_snippets.to_string()],
            vec!["negative_snippets".to_string(), report.negative_snippets.to_string()],
            vec![
                "mean_snippets_per_note".to_string(),
                format!("{:.4}", report.mean_snippets_per_note),
            ],
        ],
    )?;

    let profiles = cohort::positive_note_profile(&statuses, &results.snippets, &assignments, 25)?;
    let table6: Vec<Vec<String>> = profiles
        .iter()
        .map(|p| {
            vec![
                group_slug(p.group).to_string(),
                p.patients.to_string(),
                p.drug_name_patients.to_string(),
                p.other_phrase_patients.to_string(),
                opt(p.positive_snippets_mean),
                opt(p.positive_snippets_sd),
            ]
        })
        .collect();
    write_csv(
        &out.join("table6.csv"),
        &["group", "patients", "drug_name_patients", "other_phrase_patients", "positive_snippets_mean", "positive_snippets_sd"],
        &table6,
    )?;
    for profile in &profiles {
        let rows: Vec<Vec<String>> = profile
            .top_note_types
            .iter()
            .map(|(ty, count)| vec![ty.clone(), count.to_string()])
            .collect();
        write_csv(
            &out.join(format!("note_types_{}.csv", group_slug(profile.group))),
            &["note_type", "positive_snippets"],
            &rows,
        )?;
    }
    write_manifest(
        out,
        "report",
        config,
        &[snippets_path, nlp_patients_path, assignments_path],
    )?;
    eprintln!(
        "report: {} snippets ({} positive) over {} notes",
        report.total_snippets, report.positive_snippets, report.total_notes
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Synth { out, patients } => cmd_synth(&config, out, *patients),
        Command::Extract { corpus, out } => cmd_extract(&config, corpus, out),
        Command::Train { snippets, truth, out, dump_vocab, all_snippets } => {
            cmd_train(&config, snippets, truth, out, *dump_vocab, *all_snippets)
        }
        Command::Classify { corpus, model, out, workers, explain } => {
            cmd_classify(&config, corpus, model, out, *workers, *explain)
        }
        Command::Evaluate { predictions, truth, out, gate } => {
            cmd_evaluate(&config, predictions, truth, out, *gate)
        }
        Command::Cohort { corpus, nlp_patients, out, encounter_origin } => {
            cmd_cohort(&config, corpus, nlp_patients, out, encounter_origin.as_deref())
        }
        Command::Report { snippets, nlp_patients, assignments, out } => {
            cmd_report(&config, snippets, nlp_patients, assignments, out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e @ (Error::InvalidConfig(_) | Error::Parse { .. })) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            3
        }
    };
    std::process::exit(code);
}
