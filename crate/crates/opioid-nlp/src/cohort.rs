//! ICD-based flagging, group assignment, derived clinical variables, and the
//! statistics battery (ASD, Welch t, chi-square) with comparison-table and
//! note-profile builders.

use crate::cascade::{PatientNlpStatus, SnippetClassification};
use crate::corpus::{CodeSystem, Corpus, DiagnosisRecord, DrugClass, Setting};
use crate::{Error, Group, Label, Result};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

/// Qualifying OUD codes: ICD-9 matched exactly, ICD-10 matched by prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcdCodeSet {
    pub icd9_exact: HashSet<String>,
    pub icd10_prefixes: HashSet<String>,
}

impl Default for IcdCodeSet {
    fn default() -> Self {
        IcdCodeSet {
            icd9_exact: ["304.00", "304.70", "305.50"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            icd10_prefixes: std::iter::once("F11".to_string()).collect(),
        }
    }
}

impl IcdCodeSet {
    pub fn validate(&self) -> Result<()> {
        if self.icd9_exact.is_empty() && self.icd10_prefixes.is_empty() {
            return Err(Error::InvalidConfig("empty ICD code set".into()));
        }
        Ok(())
    }

    pub fn matches(&self, diagnosis: &DiagnosisRecord) -> bool {
        match diagnosis.code_system {
            CodeSystem::ICD9 => self.icd9_exact.contains(&diagnosis.code),
            CodeSystem::ICD10 => self
                .icd10_prefixes
                .iter()
                .any(|p| diagnosis.code.starts_with(p.as_str())),
        }
    }
}

/// Earliest qualifying diagnosis date per flagged patient. Only diagnoses
/// inside the study window (when given) count.
pub fn flag_icd_oud(
    diagnoses: &[DiagnosisRecord],
    codes: &IcdCodeSet,
    study_window: Option<(NaiveDate, NaiveDate)>,
) -> Result<BTreeMap<String, NaiveDate>> {
    codes.validate()?;
    let mut first: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for dx in diagnoses {
        if let Some((start, end)) = study_window {
            if dx.diagnosis_date < start || dx.diagnosis_date > end {
                continue;
            }
        }
        if codes.matches(dx) {
            first
                .entry(dx.patient_id.clone())
                .and_modify(|d| *d = (*d).min(dx.diagnosis_date))
                .or_insert(dx.diagnosis_date);
        }
    }
    Ok(first)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub patient_id: String,
    pub group: Group,
    /// AllIcd patients who also have at least one positive snippet.
    pub nlp_icd_member: bool,
    /// First documentation of problematic use from either source; absent for
    /// NoProblematic.
    pub index_date: Option<NaiveDate>,
}

/// Mutually exclusive, exhaustive assignment over `patient_ids`, ordered by
/// patient id. AllIcd takes precedence over NLP positivity.
pub fn assign_groups(
    patient_ids: &[String],
    nlp_statuses: &[PatientNlpStatus],
    icd_first_dates: &BTreeMap<String, NaiveDate>,
) -> Result<Vec<GroupAssignment>> {
    let by_patient: HashMap<&str, &PatientNlpStatus> = nlp_statuses
        .iter()
        .map(|s| (s.patient_id.as_str(), s))
        .collect();
    let mut ids: Vec<&String> = patient_ids.iter().collect();
    ids.sort();
    ids.dedup();
    if ids.len() != patient_ids.len() {
        return Err(Error::DuplicateKey {
            kind: "patient_id",
            key: "cohort list".into(),
        });
    }
    for status in nlp_statuses {
        if ids.binary_search(&&status.patient_id).is_err() {
            return Err(Error::InvalidRecord(format!(
                "NLP status for unknown patient '{}'",
                status.patient_id
            )));
        }
    }
    let mut assignments = Vec::with_capacity(ids.len());
    for id in ids {
        let icd_date = icd_first_dates.get(id).copied();
        let nlp = by_patient.get(id.as_str());
        let nlp_positive = nlp.map_or(false, |s| s.nlp_positive);
        let nlp_date = nlp.and_then(|s| s.first_positive_date);
        let (group, index_date) = if icd_date.is_some() {
            let index = match (icd_date, nlp_date) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            (Group::AllIcd, index)
        } else if nlp_positive {
            (Group::NlpOnly, nlp_date)
        } else {
            (Group::NoProblematic, None)
        };
        assignments.push(GroupAssignment {
            patient_id: id.clone(),
            group,
            nlp_icd_member: group == Group::AllIcd && nlp_positive,
            index_date,
        });
    }
    Ok(assignments)
}

/// One comorbidity definition: any diagnosis whose code starts with one of
/// the prefixes (per code system) sets the flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComorbidityDef {
    pub variable: String,
    pub prefixes: Vec<(CodeSystem, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComorbidityMap {
    /// Definitions in file order; drives row order in Table 5 output.
    pub definitions: Vec<ComorbidityDef>,
}

/// Parse `variable<TAB>code_system<TAB>prefix` lines; '#' comments allowed.
/// Repeated variable names accumulate prefixes.
pub fn parse_comorbidity_map(source: &str, origin: &str) -> Result<ComorbidityMap> {
    let mut map = ComorbidityMap::default();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: "expected variable<TAB>code_system<TAB>prefix".into(),
            });
        }
        let system = match parts[1].trim() {
            "ICD9" => CodeSystem::ICD9,
            "ICD10" => CodeSystem::ICD10,
            other => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    msg: format!("unknown code system '{other}'"),
                })
            }
        };
        let variable = parts[0].trim();
        let prefix = parts[2].trim().to_string();
        match map.definitions.iter_mut().find(|d| d.variable == variable) {
            Some(def) => def.prefixes.push((system, prefix)),
            None => map.definitions.push(ComorbidityDef {
                variable: variable.to_string(),
                prefixes: vec![(system, prefix)],
            }),
        }
    }
    if map.definitions.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{origin}: no comorbidity definitions"
        )));
    }
    Ok(map)
}

pub fn load_comorbidity_map(path: &Path) -> Result<ComorbidityMap> {
    let source = std::fs::read_to_string(path)?;
    parse_comorbidity_map(&source, &path.display().to_string())
}

pub fn default_comorbidity_map() -> ComorbidityMap {
    parse_comorbidity_map(crate::DEFAULT_COMORBIDITY_MAP, "<builtin>")
        .expect("builtin comorbidity map parses")
}

/// Origin for outpatient-encounter counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncounterOrigin {
    /// After the problematic-use index date; falls back to cohort entry (and
    /// flags the fallback) when the patient has none.
    Index,
    /// After cohort entry for everyone.
    Entry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientVariables {
    pub patient_id: String,
    pub group: Group,
    pub age_at_entry: i32,
    pub gender: crate::corpus::Gender,
    pub marital_status: crate::corpus::MaritalStatus,
    pub race: crate::corpus::Race,
    pub ethnicity: crate::corpus::Ethnicity,
    /// Flags keyed by comorbidity-map variable name.
    pub comorbidities: BTreeMap<String, bool>,
    pub prior_opioid_rx: bool,
    pub concurrent_benzo: bool,
    /// Distinct calendar days with an outpatient encounter after the origin.
    pub outpatient_encounters: u32,
    /// True when Index origin was requested but the patient has no index
    /// date, so counting ran from cohort entry instead.
    pub encounter_origin_fallback: bool,
}

fn intervals_overlap(a: (NaiveDate, NaiveDate), b: (NaiveDate, NaiveDate)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

pub fn derive_variables(
    corpus: &Corpus,
    assignments: &[GroupAssignment],
    map: &ComorbidityMap,
    encounter_origin: EncounterOrigin,
) -> Result<Vec<PatientVariables>> {
    let assignment_by_id: HashMap<&str, &GroupAssignment> = assignments
        .iter()
        .map(|a| (a.patient_id.as_str(), a))
        .collect();
    let mut dx_by_patient: HashMap<&str, Vec<&DiagnosisRecord>> = HashMap::new();
    for dx in &corpus.diagnoses {
        dx_by_patient.entry(&dx.patient_id).or_default().push(dx);
    }
    let mut rx_by_patient: HashMap<&str, Vec<&crate::corpus::PrescriptionRecord>> = HashMap::new();
    for rx in &corpus.prescriptions {
        rx_by_patient.entry(&rx.patient_id).or_default().push(rx);
    }
    let mut enc_by_patient: HashMap<&str, Vec<&crate::corpus::EncounterRecord>> = HashMap::new();
    for enc in &corpus.encounters {
        enc_by_patient.entry(&enc.patient_id).or_default().push(enc);
    }

    let mut out = Vec::with_capacity(corpus.patients.len());
    let mut patients: Vec<&crate::corpus::PatientRecord> = corpus.patients.iter().collect();
    patients.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    for patient in patients {
        let assignment = assignment_by_id
            .get(patient.patient_id.as_str())
            .ok_or_else(|| {
                Error::InvalidRecord(format!("patient '{}' has no group", patient.patient_id))
            })?;
        let entry = patient.cohort_entry_date;
        let diagnoses = dx_by_patient
            .get(patient.patient_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let mut comorbidities = BTreeMap::new();
        for def in &map.definitions {
            let flagged = diagnoses.iter().any(|dx| {
                dx.diagnosis_date >= entry
                    && def
                        .prefixes
                        .iter()
                        .any(|(sys, p)| dx.code_system == *sys && dx.code.starts_with(p.as_str()))
            });
            comorbidities.insert(def.variable.clone(), flagged);
        }

        let prescriptions = rx_by_patient
            .get(patient.patient_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let opioid_spans: Vec<(NaiveDate, NaiveDate)> = prescriptions
            .iter()
            .filter(|rx| rx.drug_class == DrugClass::Opioid)
            .map(|rx| (rx.start_date, rx.end_date))
            .collect();
        let prior_opioid_rx = assignment.index_date.map_or(false, |index| {
            opioid_spans.iter().any(|(start, _)| *start < index)
        });
        let concurrent_benzo = prescriptions
            .iter()
            .filter(|rx| rx.drug_class == DrugClass::Benzodiazepine)
            .any(|benzo| {
                opioid_spans
                    .iter()
                    .any(|span| intervals_overlap(*span, (benzo.start_date, benzo.end_date)))
            });

        let (origin_date, fallback) = match (encounter_origin, assignment.index_date) {
            (EncounterOrigin::Index, Some(index)) => (index, false),
            (EncounterOrigin::Index, None) => (entry, true),
            (EncounterOrigin::Entry, _) => (entry, false),
        };
        let outpatient_days: BTreeSet<NaiveDate> = enc_by_patient
            .get(patient.patient_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .filter(|e| e.setting == Setting::Outpatient && e.encounter_date > origin_date)
            .map(|e| e.encounter_date)
            .collect();

        out.push(PatientVariables {
            patient_id: patient.patient_id.clone(),
            group: assignment.group,
            age_at_entry: entry.year() - patient.birth_year,
            gender: patient.gender,
            marital_status: patient.marital_status,
            race: patient.race,
            ethnicity: patient.ethnicity,
            comorbidities,
            prior_opioid_rx,
            concurrent_benzo,
            outpatient_encounters: outpatient_days.len() as u32,
            encounter_origin_fallback: fallback,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// |p1 - p2| / sqrt((p1(1-p1) + p2(1-p2)) / 2) * 100
pub fn asd_binary(p1: f64, p2: f64) -> Result<f64> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("proportion {p} outside [0,1]")));
        }
    }
    let denom = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / 2.0).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "ASD undefined: both proportions at a boundary".into(),
        ));
    }
    Ok((p1 - p2).abs() / denom * 100.0)
}

/// |m1 - m2| / sqrt((s1^2 + s2^2) / 2) * 100
pub fn asd_continuous(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    if s1 < 0.0 || s2 < 0.0 {
        return Err(Error::InvalidConfig("negative standard deviation".into()));
    }
    let denom = ((s1 * s1 + s2 * s2) / 2.0).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("ASD undefined: both SDs zero".into()));
    }
    Ok((m1 - m2).abs() / denom * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided Welch (unequal variance) two-sample t test from summary
/// statistics, Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(m1: f64, s1: f64, n1: u64, m2: f64, s2: f64, n2: u64) -> Result<TTestResult> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::Degenerate("t test needs n >= 2 per group".into()));
    }
    let (v1, v2) = (s1 * s1 / n1 as f64, s2 * s2 / n2 as f64);
    if v1 + v2 == 0.0 {
        return Err(Error::Degenerate("t test undefined: zero variance".into()));
    }
    let t = (m1 - m2) / (v1 + v2).sqrt();
    let df = (v1 + v2).powi(2)
        / (v1 * v1 / (n1 as f64 - 1.0) + v2 * v2 / (n2 as f64 - 1.0));
    Ok(TTestResult { t, df, p: t_two_sided_p(t, df)? })
}

/// Pooled-variance (Student) form, df = n1 + n2 - 2.
pub fn pooled_t_test(m1: f64, s1: f64, n1: u64, m2: f64, s2: f64, n2: u64) -> Result<TTestResult> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::Degenerate("t test needs n >= 2 per group".into()));
    }
    let df = (n1 + n2 - 2) as f64;
    let sp2 =
        ((n1 as f64 - 1.0) * s1 * s1 + (n2 as f64 - 1.0) * s2 * s2) / df;
    let se = (sp2 * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return Err(Error::Degenerate("t test undefined: zero variance".into()));
    }
    let t = (m1 - m2) / se;
    Ok(TTestResult { t, df, p: t_two_sided_p(t, df)? })
}

/// Two-sided p for a Student-t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Degenerate(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Upper-tail p for a chi-square statistic.
pub fn chi_square_p(chi2: f64, df: u64) -> Result<f64> {
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::Degenerate(format!("chi-square distribution: {e}")))?;
    Ok(dist.sf(chi2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: u64,
    pub p: f64,
}

/// Pearson chi-square over an r x c table of counts.
pub fn chi_square_test(table: &[Vec<u64>]) -> Result<ChiSquareResult> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig(
            "chi-square needs a rectangular table of at least 2x2".into(),
        ));
    }
    let row_sums: Vec<f64> = table
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j] as f64).sum())
        .collect();
    let total: f64 = row_sums.iter().sum();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(Error::Degenerate("chi-square: zero marginal".into()));
    }
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            let d = observed as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as u64;
    Ok(ChiSquareResult {
        chi2,
        df,
        p: chi_square_p(chi2, df)?,
    })
}

/// Report-style rendering: 4 decimal places, floored at "<0.0001".
pub fn format_p_value(p: f64) -> String {
    if p < 0.0001 {
        "<0.0001".to_string()
    } else {
        format!("{p:.4}")
    }
}

// ---------------------------------------------------------------------------
// Comparison tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum GroupSummary {
    Proportion { count: u64, total: u64, proportion: f64 },
    MeanSd { mean: f64, sd: f64, n: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub variable: String,
    /// Level name for multi-level categoricals.
    pub level: Option<String>,
    pub left: GroupSummary,
    pub right: GroupSummary,
    /// Shared across all levels of one categorical variable. `None` when the
    /// test is degenerate for this row.
    pub p_value: Option<f64>,
    pub asd_percent: Option<f64>,
    pub imbalanced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub left_group: Group,
    pub right_group: Group,
    pub left_n: u64,
    pub right_n: u64,
    pub demographic_rows: Vec<ComparisonRow>,
    pub clinical_rows: Vec<ComparisonRow>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, sd)
}

fn continuous_row(variable: &str, left: &[f64], right: &[f64]) -> ComparisonRow {
    let (m1, s1) = mean_sd(left);
    let (m2, s2) = mean_sd(right);
    let asd = asd_continuous(m1, s1, m2, s2).ok();
    let p = welch_t_test(m1, s1, left.len() as u64, m2, s2, right.len() as u64)
        .ok()
        .map(|r| r.p);
    ComparisonRow {
        variable: variable.to_string(),
        level: None,
        left: GroupSummary::MeanSd { mean: m1, sd: s1, n: left.len() as u64 },
        right: GroupSummary::MeanSd { mean: m2, sd: s2, n: right.len() as u64 },
        p_value: p,
        asd_percent: asd,
        imbalanced: asd.map_or(false, |a| a > 10.0),
    }
}

fn binary_row(variable: &str, left_hits: u64, left_n: u64, right_hits: u64, right_n: u64) -> ComparisonRow {
    let (p1, p2) = (left_hits as f64 / left_n as f64, right_hits as f64 / right_n as f64);
    let asd = asd_binary(p1, p2).ok();
    let table = vec![
        vec![left_hits, left_n - left_hits],
        vec![right_hits, right_n - right_hits],
    ];
    let p = chi_square_test(&table).ok().map(|r| r.p);
    ComparisonRow {
        variable: variable.to_string(),
        level: None,
        left: GroupSummary::Proportion { count: left_hits, total: left_n, proportion: p1 },
        right: GroupSummary::Proportion { count: right_hits, total: right_n, proportion: p2 },
        p_value: p,
        asd_percent: asd,
        imbalanced: asd.map_or(false, |a| a > 10.0),
    }
}

/// One chi-square over the full contingency plus per-level binary ASDs.
fn categorical_rows(
    variable: &str,
    levels: &[(&str, u64, u64)], // (level name, left count, right count)
    left_n: u64,
    right_n: u64,
) -> Vec<ComparisonRow> {
    let occupied: Vec<&(&str, u64, u64)> =
        levels.iter().filter(|(_, a, b)| a + b > 0).collect();
    let shared_p = if occupied.len() >= 2 {
        let table: Vec<Vec<u64>> = vec![
            occupied.iter().map(|(_, a, _)| *a).collect(),
            occupied.iter().map(|(_, _, b)| *b).collect(),
        ];
        chi_square_test(&table).ok().map(|r| r.p)
    } else {
        None
    };
    levels
        .iter()
        .map(|(level, a, b)| {
            let (p1, p2) = (*a as f64 / left_n as f64, *b as f64 / right_n as f64);
            let asd = asd_binary(p1, p2).ok();
            ComparisonRow {
                variable: variable.to_string(),
                level: Some(level.to_string()),
                left: GroupSummary::Proportion { count: *a, total: left_n, proportion: p1 },
                right: GroupSummary::Proportion { count: *b, total: right_n, proportion: p2 },
                p_value: shared_p,
                asd_percent: asd,
                imbalanced: asd.map_or(false, |v| v > 10.0),
            }
        })
        .collect()
}

/// Table 4/5-shaped comparison of two groups: demographics (age plus the
/// categorical enums), then comorbidity flags, prescriptions, and outpatient
/// encounters.
pub fn build_comparison_table(
    variables: &[PatientVariables],
    left_group: Group,
    right_group: Group,
    map: &ComorbidityMap,
) -> Result<ComparisonTable> {
    let left: Vec<&PatientVariables> =
        variables.iter().filter(|v| v.group == left_group).collect();
    let right: Vec<&PatientVariables> =
        variables.iter().filter(|v| v.group == right_group).collect();
    if left.is_empty() || right.is_empty() {
        return Err(Error::Degenerate(format!(
            "empty comparison group ({left_group:?}: {}, {right_group:?}: {})",
            left.len(),
            right.len()
        )));
    }
    let (left_n, right_n) = (left.len() as u64, right.len() as u64);

    let mut demographic_rows = Vec::new();
    let ages = |side: &[&PatientVariables]| -> Vec<f64> {
        side.iter().map(|v| v.age_at_entry as f64).collect()
    };
    demographic_rows.push(continuous_row("Age at cohort entry", &ages(&left), &ages(&right)));

    macro_rules! categorical {
        ($name:expr, $field:ident, [$(($label:expr, $variant:pat)),+ $(,)?]) => {{
            let levels: Vec<(&str, u64, u64)> = vec![$((
                $label,
                left.iter().filter(|v| matches!(v.$field, $variant)).count() as u64,
                right.iter().filter(|v| matches!(v.$field, $variant)).count() as u64,
            )),+];
            demographic_rows.extend(categorical_rows($name, &levels, left_n, right_n));
        }};
    }
    use crate::corpus::{Ethnicity, Gender, MaritalStatus, Race};
    categorical!("Gender", gender, [("M", Gender::M), ("F", Gender::F)]);
    categorical!(
        "Marital status",
        marital_status,
        [
            ("Married", MaritalStatus::Married),
            ("Divorced", MaritalStatus::Divorced),
            ("Never married", MaritalStatus::NeverMarried),
            ("Widowed", MaritalStatus::Widowed),
            ("Separated", MaritalStatus::Separated),
            ("Missing/other", MaritalStatus::MissingOther),
        ]
    );
    categorical!(
        "Race",
        race,
        [
            ("Black or African American", Race::BlackAfricanAmerican),
            ("White", Race::White),
            ("Asian", Race::Asian),
            ("Native Hawaiian or Pacific Islander", Race::NativeHawaiianPacIslander),
            ("American Indian or Alaska Native", Race::AmericanIndianAlaskaNative),
            ("Unknown", Race::Unknown),
        ]
    );
    categorical!(
        "Ethnicity",
        ethnicity,
        [
            ("Not Hispanic or Latino", Ethnicity::NotHispanicOrLatino),
            ("Hispanic or Latino", Ethnicity::HispanicOrLatino),
            ("Unknown", Ethnicity::Unknown),
        ]
    );

    let mut clinical_rows = Vec::new();
    for def in &map.definitions {
        let hits = |side: &[&PatientVariables]| {
            side.iter()
                .filter(|v| v.comorbidities.get(&def.variable).copied().unwrap_or(false))
                .count() as u64
        };
        clinical_rows.push(binary_row(&def.variable, hits(&left), left_n, hits(&right), right_n));
    }
    let flag_hits = |side: &[&PatientVariables], f: fn(&PatientVariables) -> bool| {
        side.iter().filter(|v| f(v)).count() as u64
    };
    clinical_rows.push(binary_row(
        "Prior opioid prescription",
        flag_hits(&left, |v| v.prior_opioid_rx),
        left_n,
        flag_hits(&right, |v| v.prior_opioid_rx),
        right_n,
    ));
    clinical_rows.push(binary_row(
        "Concurrent benzodiazepine prescription",
        flag_hits(&left, |v| v.concurrent_benzo),
        left_n,
        flag_hits(&right, |v| v.concurrent_benzo),
        right_n,
    ));
    let encounters = |side: &[&PatientVariables]| -> Vec<f64> {
        side.iter().map(|v| v.outpatient_encounters as f64).collect()
    };
    clinical_rows.push(continuous_row(
        "Outpatient encounters",
        &encounters(&left),
        &encounters(&right),
    ));

    Ok(ComparisonTable {
        left_group,
        right_group,
        left_n,
        right_n,
        demographic_rows,
        clinical_rows,
    })
}

/// Both standard pairings: AllIcd vs NlpOnly, and NlpOnly vs NoProblematic.
pub fn build_comparison_tables(
    variables: &[PatientVariables],
    map: &ComorbidityMap,
) -> Result<Vec<ComparisonTable>> {
    Ok(vec![
        build_comparison_table(variables, Group::AllIcd, Group::NlpOnly, map)?,
        build_comparison_table(variables, Group::NlpOnly, Group::NoProblematic, map)?,
    ])
}

// ---------------------------------------------------------------------------
// Positive-note profile (Table 6 / note-type figures)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupNoteProfile {
    pub group: Group,
    pub patients: u64,
    /// Patients with >= 1 positive drug-name snippet; a patient may count in
    /// both categories.
    pub drug_name_patients: u64,
    pub other_phrase_patients: u64,
    /// Over patients with >= 1 positive snippet; sample SD.
    pub positive_snippets_mean: Option<f64>,
    pub positive_snippets_sd: Option<f64>,
    /// (note type, positive snippet count), descending count then name.
    pub top_note_types: Vec<(String, u64)>,
}

pub fn positive_note_profile(
    statuses: &[PatientNlpStatus],
    snippets: &[SnippetClassification],
    assignments: &[GroupAssignment],
    top_k: usize,
) -> Result<Vec<GroupNoteProfile>> {
    let group_of: HashMap<&str, Group> = assignments
        .iter()
        .map(|a| (a.patient_id.as_str(), a.group))
        .collect();
    let mut profiles: Vec<GroupNoteProfile> =
        [Group::AllIcd, Group::NlpOnly, Group::NoProblematic]
            .iter()
            .map(|g| GroupNoteProfile {
                group: *g,
                patients: assignments.iter().filter(|a| a.group == *g).count() as u64,
                drug_name_patients: 0,
                other_phrase_patients: 0,
                positive_snippets_mean: None,
                positive_snippets_sd: None,
                top_note_types: Vec::new(),
            })
            .collect();
    let slot = |g: Group| match g {
        Group::AllIcd => 0usize,
        Group::NlpOnly => 1,
        Group::NoProblematic => 2,
    };

    let mut counts_per_group: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for status in statuses {
        let group = *group_of.get(status.patient_id.as_str()).ok_or_else(|| {
            Error::InvalidRecord(format!("status for unassigned patient '{}'", status.patient_id))
        })?;
        let i = slot(group);
        if status.drug_name_positive {
            profiles[i].drug_name_patients += 1;
        }
        if status.other_phrase_positive {
            profiles[i].other_phrase_patients += 1;
        }
        if status.positive_snippet_count > 0 {
            counts_per_group[i].push(status.positive_snippet_count as f64);
        }
    }
    for (i, counts) in counts_per_group.iter().enumerate() {
        if !counts.is_empty() {
            let (mean, sd) = mean_sd(counts);
            profiles[i].positive_snippets_mean = Some(mean);
            profiles[i].positive_snippets_sd = Some(sd);
        }
    }

    let mut type_counts: [BTreeMap<&str, u64>; 3] = Default::default();
    for snippet in snippets {
        if snippet.label != Label::Positive {
            continue;
        }
        let group = *group_of.get(snippet.patient_id.as_str()).ok_or_else(|| {
            Error::InvalidRecord(format!("snippet for unassigned patient '{}'", snippet.patient_id))
        })?;
        *type_counts[slot(group)].entry(&snippet.note_type).or_insert(0) += 1;
    }
    for (i, counts) in type_counts.iter().enumerate() {
        let mut ranked: Vec<(String, u64)> = counts
            .iter()
            .map(|(t, c)| (t.to_string(), *c))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(top_k);
        profiles[i].top_note_types = ranked;
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        EncounterRecord, Ethnicity, Gender, MaritalStatus, PatientRecord, PrescriptionRecord,
        Race,
    };
    use crate::lexicon::PhraseCategory;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn dx(pid: &str, system: CodeSystem, code: &str, when: &str) -> DiagnosisRecord {
        DiagnosisRecord {
            patient_id: pid.into(),
            code_system: system,
            code: code.into(),
            diagnosis_date: date(when),
        }
    }

    #[test]
    fn icd_matching_rules() {
        let codes = IcdCodeSet::default();
        assert!(codes.matches(&dx("p", CodeSystem::ICD9, "304.00", "2015-01-01")));
        assert!(codes.matches(&dx("p", CodeSystem::ICD10, "F11.20", "2015-01-01")));
        assert!(codes.matches(&dx("p", CodeSystem::ICD10, "F11", "2015-01-01")));
        assert!(!codes.matches(&dx("p", CodeSystem::ICD9, "304.01", "2015-01-01")));
        assert!(!codes.matches(&dx("p", CodeSystem::ICD9, "F11.20", "2015-01-01")));
    }

    #[test]
    fn first_icd_date_and_window() {
        let diagnoses = vec![
            dx("p1", CodeSystem::ICD9, "304.00", "2016-03-01"),
            dx("p1", CodeSystem::ICD10, "F11.10", "2014-06-01"),
            dx("p1", CodeSystem::ICD9, "305.50", "2010-01-01"), // outside window
            dx("p2", CodeSystem::ICD9, "401.9", "2015-01-01"),  // not qualifying
        ];
        let window = Some((date("2012-01-01"), date("2019-12-31")));
        let flags = flag_icd_oud(&diagnoses, &IcdCodeSet::default(), window).unwrap();
        assert_eq!(flags.get("p1"), Some(&date("2014-06-01")));
        assert!(!flags.contains_key("p2"));
    }

    fn status(pid: &str, positive: bool, first: Option<&str>) -> PatientNlpStatus {
        PatientNlpStatus {
            patient_id: pid.into(),
            nlp_positive: positive,
            positive_snippet_count: if positive { 2 } else { 0 },
            first_positive_date: first.map(date),
            drug_name_positive: positive,
            other_phrase_positive: false,
        }
    }

    #[test]
    fn group_assignment_definitions() {
        let ids: Vec<String> = ["p1", "p2", "p3"].iter().map(|s| s.to_string()).collect();
        let statuses = vec![status("p1", true, Some("2014-01-01")), status("p2", true, Some("2015-05-05"))];
        let mut icd = BTreeMap::new();
        icd.insert("p1".to_string(), date("2013-06-01"));
        let assignments = assign_groups(&ids, &statuses, &icd).unwrap();
        assert_eq!(assignments[0].group, Group::AllIcd);
        assert!(assignments[0].nlp_icd_member);
        assert_eq!(assignments[0].index_date, Some(date("2013-06-01")));
        assert_eq!(assignments[1].group, Group::NlpOnly);
        assert_eq!(assignments[1].index_date, Some(date("2015-05-05")));
        assert_eq!(assignments[2].group, Group::NoProblematic);
        assert_eq!(assignments[2].index_date, None);
    }

    #[test]
    fn nlp_date_before_icd_date_wins_index() {
        let ids = vec!["p1".to_string()];
        let statuses = vec![status("p1", true, Some("2012-02-02"))];
        let mut icd = BTreeMap::new();
        icd.insert("p1".to_string(), date("2013-06-01"));
        let assignments = assign_groups(&ids, &statuses, &icd).unwrap();
        assert_eq!(assignments[0].index_date, Some(date("2012-02-02")));
    }

    #[test]
    fn partition_identity_on_random_cohort() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let ids: Vec<String> = (0..300).map(|i| format!("p{i:03}")).collect();
        let mut statuses = Vec::new();
        let mut icd = BTreeMap::new();
        for id in &ids {
            if rng.gen_bool(0.3) {
                statuses.push(status(id, true, Some("2015-01-01")));
            }
            if rng.gen_bool(0.1) {
                icd.insert(id.clone(), date("2014-01-01"));
            }
        }
        let assignments = assign_groups(&ids, &statuses, &icd).unwrap();
        assert_eq!(assignments.len(), ids.len());
        let count = |g: Group| assignments.iter().filter(|a| a.group == g).count();
        assert_eq!(
            count(Group::AllIcd) + count(Group::NlpOnly) + count(Group::NoProblematic),
            ids.len()
        );
        let nlp_positive = statuses.len();
        let nlp_icd = assignments.iter().filter(|a| a.nlp_icd_member).count();
        assert_eq!(nlp_positive, count(Group::NlpOnly) + nlp_icd);
        for a in &assignments {
            assert_eq!(a.index_date.is_some(), a.group != Group::NoProblematic);
        }
    }

    fn one_patient_corpus() -> (Corpus, Vec<GroupAssignment>) {
        let mut corpus = Corpus::default();
        corpus.patients.push(PatientRecord {
            patient_id: "p1".into(),
            birth_year: 1960,
            gender: Gender::M,
            marital_status: MaritalStatus::Married,
            race: Race::White,
            ethnicity: Ethnicity::NotHispanicOrLatino,
            cohort_entry_date: date("2013-03-01"),
        });
        let assignments = vec![GroupAssignment {
            patient_id: "p1".into(),
            group: Group::NlpOnly,
            nlp_icd_member: false,
            index_date: Some(date("2016-01-01")),
        }];
        (corpus, assignments)
    }

    #[test]
    fn derived_variable_examples() {
        let (mut corpus, assignments) = one_patient_corpus();
        corpus.prescriptions.push(PrescriptionRecord {
            patient_id: "p1".into(),
            drug_class: DrugClass::Opioid,
            start_date: date("2015-02-01"),
            end_date: date("2015-04-01"),
        });
        corpus.prescriptions.push(PrescriptionRecord {
            patient_id: "p1".into(),
            drug_class: DrugClass::Benzodiazepine,
            start_date: date("2015-01-01"),
            end_date: date("2015-03-01"),
        });
        for when in ["2016-05-05", "2016-05-05", "2016-05-06"] {
            corpus.encounters.push(EncounterRecord {
                patient_id: "p1".into(),
                encounter_date: date(when),
                setting: Setting::Outpatient,
            });
        }
        corpus.diagnoses.push(dx("p1", CodeSystem::ICD10, "I10", "2014-01-01"));
        corpus.diagnoses.push(dx("p1", CodeSystem::ICD10, "F32.9", "2010-01-01")); // pre-entry

        let vars = derive_variables(
            &corpus,
            &assignments,
            &default_comorbidity_map(),
            EncounterOrigin::Index,
        )
        .unwrap();
        let v = &vars[0];
        assert_eq!(v.age_at_entry, 53);
        assert!(v.prior_opioid_rx);
        assert!(v.concurrent_benzo);
        assert_eq!(v.outpatient_encounters, 2); // two dates visited twice = max 1/day
        assert!(!v.encounter_origin_fallback);
        assert_eq!(v.comorbidities.get("Hypertension"), Some(&true));
        assert_eq!(v.comorbidities.get("Depression"), Some(&false)); // before entry
    }

    #[test]
    fn missing_index_date_falls_back_to_entry() {
        let (mut corpus, mut assignments) = one_patient_corpus();
        assignments[0].group = Group::NoProblematic;
        assignments[0].index_date = None;
        corpus.encounters.push(EncounterRecord {
            patient_id: "p1".into(),
            encounter_date: date("2014-01-01"),
            setting: Setting::Outpatient,
        });
        let vars = derive_variables(
            &corpus,
            &assignments,
            &default_comorbidity_map(),
            EncounterOrigin::Index,
        )
        .unwrap();
        assert!(vars[0].encounter_origin_fallback);
        assert_eq!(vars[0].outpatient_encounters, 1);
    }

    #[test]
    fn non_overlapping_benzo_is_not_concurrent() {
        let (mut corpus, assignments) = one_patient_corpus();
        corpus.prescriptions.push(PrescriptionRecord {
            patient_id: "p1".into(),
            drug_class: DrugClass::Opioid,
            start_date: date("2015-02-01"),
            end_date: date("2015-04-01"),
        });
        corpus.prescriptions.push(PrescriptionRecord {
            patient_id: "p1".into(),
            drug_class: DrugClass::Benzodiazepine,
            start_date: date("2015-04-02"),
            end_date: date("2015-05-01"),
        });
        let vars = derive_variables(
            &corpus,
            &assignments,
            &default_comorbidity_map(),
            EncounterOrigin::Index,
        )
        .unwrap();
        assert!(!vars[0].concurrent_benzo);
    }

    #[test]
    fn asd_binary_reference_values() {
        assert!((asd_binary(0.93, 0.82).unwrap() - 33.7).abs() < 0.1);
        assert!((asd_binary(0.618, 0.411).unwrap() - 42.3).abs() < 0.1);
        assert!((asd_binary(0.6, 0.4).unwrap() - 40.8).abs() < 0.1);
        assert_eq!(asd_binary(0.5, 0.5).unwrap(), 0.0);
        assert!(asd_binary(0.0, 0.0).is_err());
        assert!(asd_binary(1.2, 0.5).is_err());
    }

    #[test]
    fn asd_binary_complement_symmetry() {
        for (p, q) in [(0.93, 0.82), (0.1, 0.7), (0.33, 0.34)] {
            let direct = asd_binary(p, q).unwrap();
            let complement = asd_binary(1.0 - p, 1.0 - q).unwrap();
            assert!((direct - complement).abs() < 1e-12);
        }
    }

    #[test]
    fn asd_continuous_reference_values() {
        assert!((asd_continuous(53.3, 12.2, 55.4, 16.1).unwrap() - 14.7).abs() < 0.1);
        assert!((asd_continuous(50.9, 49.8, 33.4, 31.3).unwrap() - 42.1).abs() < 0.1);
        assert_eq!(asd_continuous(5.0, 2.0, 5.0, 2.0).unwrap(), 0.0);
        assert!(asd_continuous(1.0, 0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn welch_reference_values() {
        let same = welch_t_test(10.0, 2.0, 50, 10.0, 2.0, 50).unwrap();
        assert_eq!(same.t, 0.0);
        assert!((same.p - 1.0).abs() < 1e-12);

        let age = welch_t_test(53.3, 12.2, 6997, 55.4, 16.1, 57331).unwrap();
        assert!((age.t + 13.08).abs() < 0.05, "t = {}", age.t);
        assert!(age.p < 0.0001);

        let flipped = welch_t_test(55.4, 16.1, 57331, 53.3, 12.2, 6997).unwrap();
        assert!((flipped.t + age.t).abs() < 1e-12);
        assert!((flipped.p - age.p).abs() < 1e-12);
    }

    #[test]
    fn pooled_t_matches_welch_for_equal_variance() {
        let welch = welch_t_test(12.0, 3.0, 40, 10.0, 3.0, 40).unwrap();
        let pooled = pooled_t_test(12.0, 3.0, 40, 10.0, 3.0, 40).unwrap();
        assert!((welch.t - pooled.t).abs() < 1e-12);
        assert_eq!(pooled.df, 78.0);
        assert!(welch_t_test(1.0, 0.0, 5, 1.0, 0.0, 5).is_err());
        assert!(welch_t_test(1.0, 1.0, 1, 2.0, 1.0, 5).is_err());
    }

    #[test]
    fn chi_square_reference_values() {
        let uniform = chi_square_test(&[vec![10, 10], vec![10, 10]]).unwrap();
        assert_eq!(uniform.chi2, 0.0);
        assert!((uniform.p - 1.0).abs() < 1e-12);

        let skewed = chi_square_test(&[vec![20, 10], vec![10, 20]]).unwrap();
        assert!((skewed.chi2 - 6.6667).abs() < 1e-3, "chi2 = {}", skewed.chi2);
        assert_eq!(skewed.df, 1);
        assert!((skewed.p - 0.0098).abs() < 2e-4, "p = {}", skewed.p);

        // closed form for 2x2: N(ad-bc)^2 / (r1 r2 c1 c2)
        let closed = 60.0 * (20.0f64 * 20.0 - 10.0 * 10.0).powi(2) / (30.0 * 30.0 * 30.0 * 30.0);
        assert!((skewed.chi2 - closed).abs() < 1e-12);

        let doubled = chi_square_test(&[vec![40, 20], vec![20, 40]]).unwrap();
        assert!((doubled.chi2 - 2.0 * skewed.chi2).abs() < 1e-9);
        assert_eq!(doubled.df, skewed.df);

        assert!(chi_square_test(&[vec![5, 0], vec![5, 0]]).is_err());
        assert!(chi_square_test(&[vec![5, 5]]).is_err());
    }

    #[test]
    fn chi_square_p_decreases_with_deviation() {
        let mut last_p = 1.0;
        for d in 1..10u64 {
            let r = chi_square_test(&[vec![20 + d, 20 - d], vec![20 - d, 20 + d]]).unwrap();
            assert!(r.p < last_p, "d={d}: {} !< {last_p}", r.p);
            last_p = r.p;
        }
    }

    #[test]
    fn p_value_rendering() {
        assert_eq!(format_p_value(3e-5), "<0.0001");
        assert_eq!(format_p_value(0.0098), "0.0098");
        assert_eq!(format_p_value(1.0), "1.0000");
    }

    fn make_variables(n: usize, group: Group, depression_rate: f64) -> Vec<PatientVariables> {
        (0..n)
            .map(|i| {
                let mut comorbidities = BTreeMap::new();
                for def in &default_comorbidity_map().definitions {
                    comorbidities.insert(def.variable.clone(), false);
                }
                comorbidities.insert(
                    "Depression".to_string(),
                    (i as f64) < depression_rate * n as f64,
                );
                PatientVariables {
                    patient_id: format!("{group:?}-{i}"),
                    group,
                    age_at_entry: 50 + (i % 7) as i32,
                    gender: if i % 2 == 0 { Gender::M } else { Gender::F },
                    marital_status: MaritalStatus::Married,
                    race: Race::White,
                    ethnicity: Ethnicity::Unknown,
                    comorbidities,
                    prior_opioid_rx: i % 3 == 0,
                    concurrent_benzo: false,
                    outpatient_encounters: (i % 5) as u32,
                    encounter_origin_fallback: false,
                }
            })
            .collect()
    }

    #[test]
    fn identical_groups_show_no_imbalance() {
        let mut variables = make_variables(60, Group::AllIcd, 0.5);
        variables.extend(make_variables(60, Group::NlpOnly, 0.5));
        variables.extend(make_variables(60, Group::NoProblematic, 0.5));
        let tables = build_comparison_tables(&variables, &default_comorbidity_map()).unwrap();
        assert_eq!(tables.len(), 2);
        for table in &tables {
            for row in table.demographic_rows.iter().chain(&table.clinical_rows) {
                assert!(!row.imbalanced, "{} flagged", row.variable);
                if let Some(asd) = row.asd_percent {
                    assert!(asd.abs() < 1e-9, "{}: {asd}", row.variable);
                }
            }
        }
    }

    #[test]
    fn planted_depression_difference_is_flagged() {
        let mut variables = make_variables(100, Group::AllIcd, 0.6);
        variables.extend(make_variables(100, Group::NlpOnly, 0.4));
        let table = build_comparison_table(
            &variables,
            Group::AllIcd,
            Group::NlpOnly,
            &default_comorbidity_map(),
        )
        .unwrap();
        let row = table
            .clinical_rows
            .iter()
            .find(|r| r.variable == "Depression")
            .unwrap();
        assert!((row.asd_percent.unwrap() - 40.8).abs() < 0.1);
        assert!(row.imbalanced);
    }

    #[test]
    fn gender_levels_share_p_and_asd() {
        let mut variables = make_variables(80, Group::AllIcd, 0.5);
        let mut right = make_variables(80, Group::NlpOnly, 0.5);
        for v in right.iter_mut().take(20) {
            v.gender = Gender::F; // shift the split
        }
        variables.extend(right);
        let table = build_comparison_table(
            &variables,
            Group::AllIcd,
            Group::NlpOnly,
            &default_comorbidity_map(),
        )
        .unwrap();
        let gender_rows: Vec<&ComparisonRow> = table
            .demographic_rows
            .iter()
            .filter(|r| r.variable == "Gender")
            .collect();
        assert_eq!(gender_rows.len(), 2);
        // binary complement symmetry: both levels carry the same ASD and p
        let (a, b) = (gender_rows[0], gender_rows[1]);
        assert!((a.asd_percent.unwrap() - b.asd_percent.unwrap()).abs() < 1e-9);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn empty_group_errors() {
        let variables = make_variables(10, Group::AllIcd, 0.5);
        assert!(build_comparison_table(
            &variables,
            Group::AllIcd,
            Group::NlpOnly,
            &default_comorbidity_map()
        )
        .is_err());
    }

    fn classification(pid: &str, note_type: &str, label: Label) -> SnippetClassification {
        SnippetClassification {
            snippet_id: format!("{pid}-{note_type}"),
            note_id: format!("{pid}-n"),
            patient_id: pid.into(),
            note_date: date("2015-01-01"),
            note_type: note_type.into(),
            key_phrase: "opioid".into(),
            key_phrase_category: PhraseCategory::OtherKeyPhrase,
            label,
            detail: crate::cascade::Detail::MachineLearning { margin: 1.0 },
        }
    }

    #[test]
    fn note_profile_counts_and_moments() {
        let assignments = vec![
            GroupAssignment {
                patient_id: "p1".into(),
                group: Group::NlpOnly,
                nlp_icd_member: false,
                index_date: Some(date("2015-01-01")),
            },
            GroupAssignment {
                patient_id: "p2".into(),
                group: Group::NlpOnly,
                nlp_icd_member: false,
                index_date: Some(date("2015-01-01")),
            },
            GroupAssignment {
                patient_id: "p3".into(),
                group: Group::NlpOnly,
                nlp_icd_member: false,
                index_date: Some(date("2015-01-01")),
            },
        ];
        let statuses = vec![
            PatientNlpStatus {
                patient_id: "p1".into(),
                nlp_positive: true,
                positive_snippet_count: 1,
                first_positive_date: Some(date("2015-01-01")),
                drug_name_positive: true,
                other_phrase_positive: true, // counted in both columns
            },
            PatientNlpStatus {
                patient_id: "p2".into(),
                nlp_positive: true,
                positive_snippet_count: 2,
                first_positive_date: Some(date("2015-01-01")),
                drug_name_positive: true,
                other_phrase_positive: false,
            },
            PatientNlpStatus {
                patient_id: "p3".into(),
                nlp_positive: true,
                positive_snippet_count: 3,
                first_positive_date: Some(date("2015-01-01")),
                drug_name_positive: false,
                other_phrase_positive: true,
            },
        ];
        let snippets = vec![
            classification("p1", "PRIMARY CARE NOTE", Label::Positive),
            classification("p2", "PRIMARY CARE NOTE", Label::Positive),
            classification("p3", "MENTAL HEALTH NOTE", Label::Positive),
            classification("p3", "TELEPHONE NOTE", Label::Negative), // ignored
        ];
        let profiles = positive_note_profile(&statuses, &snippets, &assignments, 25).unwrap();
        let nlp = profiles.iter().find(|p| p.group == Group::NlpOnly).unwrap();
        assert_eq!(nlp.patients, 3);
        assert_eq!(nlp.drug_name_patients, 2);
        assert_eq!(nlp.other_phrase_patients, 2);
        assert!((nlp.positive_snippets_mean.unwrap() - 2.0).abs() < 1e-12);
        assert!((nlp.positive_snippets_sd.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            nlp.top_note_types,
            vec![
                ("PRIMARY CARE NOTE".to_string(), 2),
                ("MENTAL HEALTH NOTE".to_string(), 1)
            ]
        );
    }

    #[test]
    fn note_type_ranking_matches_brute_force_tally() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let types = ["A NOTE", "B NOTE", "C NOTE", "D NOTE"];
        let assignments: Vec<GroupAssignment> = (0..40)
            .map(|i| GroupAssignment {
                patient_id: format!("p{i}"),
                group: Group::NlpOnly,
                nlp_icd_member: false,
                index_date: Some(date("2015-01-01")),
            })
            .collect();
        let mut snippets = Vec::new();
        let mut tally: BTreeMap<&str, u64> = BTreeMap::new();
        for i in 0..200 {
            let pid = format!("p{}", rng.gen_range(0..40));
            let ty = types[rng.gen_range(0..types.len())];
            let positive = rng.gen_bool(0.5);
            let mut c = classification(&pid, ty, if positive { Label::Positive } else { Label::Negative });
            c.snippet_id = format!("s{i}");
            if positive {
                *tally.entry(ty).or_insert(0) += 1;
            }
            snippets.push(c);
        }
        let profiles = positive_note_profile(&[], &snippets, &assignments, 3).unwrap();
        let nlp = profiles.iter().find(|p| p.group == Group::NlpOnly).unwrap();
        let mut expected: Vec<(String, u64)> =
            tally.iter().map(|(t, c)| (t.to_string(), *c)).collect();
        expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        expected.truncate(3);
        assert_eq!(nlp.top_note_types, expected);
    }
}
