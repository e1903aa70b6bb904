//! Confusion matrix, the four gate metrics, and inter-rater percent
//! agreement. Undefined metrics (zero denominators) fail the gate.

use crate::{Error, Label, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Cell counts with Positive as the positive class. Inputs are
/// (snippet id, label) pairs aligned positionally; ids must agree.
pub fn confusion(predicted: &[(String, Label)], gold: &[(String, Label)]) -> Result<ConfusionMatrix> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let mut matrix = ConfusionMatrix::default();
    for (position, ((pid, p), (gid, g))) in predicted.iter().zip(gold).enumerate() {
        if pid != gid {
            return Err(Error::IdMismatch {
                position,
                predicted: pid.clone(),
                gold: gid.clone(),
            });
        }
        match (p, g) {
            (Label::Positive, Label::Positive) => matrix.tp += 1,
            (Label::Positive, Label::Negative) => matrix.fp += 1,
            (Label::Negative, Label::Positive) => matrix.fn_ += 1,
            (Label::Negative, Label::Negative) => matrix.tn += 1,
        }
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub gate_threshold: f64,
    pub gate_passed: bool,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn compute_metrics(matrix: &ConfusionMatrix, gate_threshold: f64) -> MetricReport {
    let precision = ratio(matrix.tp, matrix.tp + matrix.fp);
    let recall = ratio(matrix.tp, matrix.tp + matrix.fn_);
    let specificity = ratio(matrix.tn, matrix.tn + matrix.fp);
    let accuracy = ratio(matrix.tp + matrix.tn, matrix.total());
    let gate_passed = [precision, recall, specificity, accuracy]
        .iter()
        .all(|m| m.map_or(false, |v| v >= gate_threshold));
    MetricReport {
        precision,
        recall,
        specificity,
        accuracy,
        gate_threshold,
        gate_passed,
    }
}

/// Fraction of positions where two annotators agree.
pub fn percent_agreement(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Degenerate("empty annotation lists".into()));
    }
    let agreements = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(agreements as f64 / a.len() as f64)
}
