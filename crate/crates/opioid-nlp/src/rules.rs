//! Categorized regular-expression library applied by sequential voting.
//!
//! Categories are evaluated strictly in the order AbsolutePositive,
//! Canceling, GeneralPositive, Neutral; the first category with any matching
//! rule decides the verdict. Patterns run case-insensitively against the raw
//! snippet text (template markup like "[x]" survives only there).

use crate::{Error, Label, Result};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleCategory {
    AbsolutePositive,
    Canceling,
    GeneralPositive,
    Neutral,
}

impl RuleCategory {
    /// Evaluation (voting) order.
    pub const ORDER: [RuleCategory; 4] = [
        RuleCategory::AbsolutePositive,
        RuleCategory::Canceling,
        RuleCategory::GeneralPositive,
        RuleCategory::Neutral,
    ];

    pub fn label(self) -> Label {
        match self {
            RuleCategory::AbsolutePositive | RuleCategory::GeneralPositive => Label::Positive,
            RuleCategory::Canceling | RuleCategory::Neutral => Label::Negative,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "AbsolutePositive" => Some(RuleCategory::AbsolutePositive),
            "Canceling" => Some(RuleCategory::Canceling),
            "GeneralPositive" => Some(RuleCategory::GeneralPositive),
            "Neutral" => Some(RuleCategory::Neutral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatternRule {
    pub rule_id: String,
    pub category: RuleCategory,
    pub pattern: String,
    regex: Regex,
}

impl PatternRule {
    pub fn new(rule_id: &str, category: RuleCategory, pattern: &str) -> Result<Self> {
        let regex = RegexBuilder::new(pattern)
            .case_insensitive(true)
            .build()
            .map_err(|e| Error::InvalidPattern {
                rule_id: rule_id.to_string(),
                msg: e.to_string(),
            })?;
        Ok(PatternRule {
            rule_id: rule_id.to_string(),
            category,
            pattern: pattern.to_string(),
            regex,
        })
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }
}

/// Compiled rules grouped by category, preserving file order within each.
#[derive(Debug, Clone, Default)]
pub struct RuleLibrary {
    absolute_positive: Vec<PatternRule>,
    canceling: Vec<PatternRule>,
    general_positive: Vec<PatternRule>,
    neutral: Vec<PatternRule>,
}

impl RuleLibrary {
    pub fn rules(&self, category: RuleCategory) -> &[PatternRule] {
        match category {
            RuleCategory::AbsolutePositive => &self.absolute_positive,
            RuleCategory::Canceling => &self.canceling,
            RuleCategory::GeneralPositive => &self.general_positive,
            RuleCategory::Neutral => &self.neutral,
        }
    }

    fn rules_mut(&mut self, category: RuleCategory) -> &mut Vec<PatternRule> {
        match category {
            RuleCategory::AbsolutePositive => &mut self.absolute_positive,
            RuleCategory::Canceling => &mut self.canceling,
            RuleCategory::GeneralPositive => &mut self.general_positive,
            RuleCategory::Neutral => &mut self.neutral,
        }
    }

    pub fn push(&mut self, rule: PatternRule) {
        self.rules_mut(rule.category).push(rule);
    }

    pub fn len(&self) -> usize {
        RuleCategory::ORDER.iter().map(|c| self.rules(*c).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parse `rule_id<TAB>category<TAB>pattern` lines; '#' comments allowed.
pub fn parse_rule_library(source: &str, origin: &str) -> Result<RuleLibrary> {
    let mut library = RuleLibrary::default();
    let mut seen_ids = std::collections::HashSet::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.splitn(3, '\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: "expected rule_id<TAB>category<TAB>pattern".into(),
            });
        }
        let rule_id = parts[0].trim();
        let category = RuleCategory::parse(parts[1].trim()).ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: lineno + 1,
            msg: format!("unknown category '{}'", parts[1].trim()),
        })?;
        if !seen_ids.insert(rule_id.to_string()) {
            return Err(Error::DuplicateKey {
                kind: "rule_id",
                key: rule_id.to_string(),
            });
        }
        library.push(PatternRule::new(rule_id, category, parts[2])?);
    }
    Ok(library)
}

pub fn load_rule_library(path: &Path) -> Result<RuleLibrary> {
    let source = std::fs::read_to_string(path)?;
    parse_rule_library(&source, &path.display().to_string())
}

/// The starter rule library shipped with the crate.
pub fn default_rule_library() -> RuleLibrary {
    parse_rule_library(crate::DEFAULT_RULES, "<builtin>").expect("builtin rules compile")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub label: Label,
    pub matched_rule: String,
    pub matched_category: RuleCategory,
}

/// Sequential voting. Returns `None` when no category matches (the snippet
/// falls through to the machine-learning stage).
pub fn classify_by_rules(snippet_text: &str, library: &RuleLibrary) -> Option<RuleVerdict> {
    for category in RuleCategory::ORDER {
        if let Some(rule) = library
            .rules(category)
            .iter()
            .find(|r| r.is_match(snippet_text))
        {
            return Some(RuleVerdict {
                label: category.label(),
                matched_rule: rule.rule_id.clone(),
                matched_category: category,
            });
        }
    }
    None
}

/// Every matching rule across all categories, in evaluation order. Audit aid;
/// the winner of [`classify_by_rules`] is always the first entry.
pub fn explain_rules<'a>(snippet_text: &str, library: &'a RuleLibrary) -> Vec<&'a PatternRule> {
    let mut matched = Vec::new();
    for category in RuleCategory::ORDER {
        for rule in library.rules(category) {
            if rule.is_match(snippet_text) {
                matched.push(rule);
            }
        }
    }
    matched
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starter_library_covers_all_categories() {
        let library = default_rule_library();
        assert!(library.len() >= 40, "{} rules", library.len());
        for category in RuleCategory::ORDER {
            assert!(
                !library.rules(category).is_empty(),
                "no rules in {category:?}"
            );
        }
    }

    #[test]
    fn invalid_pattern_names_the_rule() {
        let err = parse_rule_library("bad_rule\tNeutral\t([\n", "t").unwrap_err();
        assert!(err.to_string().contains("bad_rule"));
    }

    #[test]
    fn library_with_only_neutral_rules_is_valid() {
        let library = parse_rule_library("n1\tNeutral\tfoo\n", "t").unwrap();
        assert_eq!(library.rules(RuleCategory::Neutral).len(), 1);
        assert!(library.rules(RuleCategory::AbsolutePositive).is_empty());
    }

    #[test]
    fn absolute_positive_classifies_positive() {
        let library = default_rule_library();
        let verdict =
            classify_by_rules("patient continues to struggle with opioid abuse", &library)
                .unwrap();
        assert_eq!(verdict.label, Label::Positive);
        assert_eq!(verdict.matched_category, RuleCategory::AbsolutePositive);
    }

    #[test]
    fn canceling_beats_general_positive() {
        let library = default_rule_library();
        let verdict = classify_by_rules("former opioid dependence", &library).unwrap();
        assert_eq!(verdict.label, Label::Negative);
        assert_eq!(verdict.matched_category, RuleCategory::Canceling);
    }

    #[test]
    fn absolute_positive_beats_neutral_in_dual_match() {
        let library = default_rule_library();
        let text = "allergies: darvon, periactin, demerol ... opioid dependence (icd-9-cm 304.00)";
        let verdict = classify_by_rules(text, &library).unwrap();
        assert_eq!(verdict.label, Label::Positive);
        assert_eq!(verdict.matched_category, RuleCategory::AbsolutePositive);
        let matched = explain_rules(text, &library);
        assert!(matched
            .iter()
            .any(|r| r.category == RuleCategory::AbsolutePositive));
        assert!(matched.iter().any(|r| r.category == RuleCategory::Neutral));
        assert_eq!(matched[0].rule_id, verdict.matched_rule);
    }

    #[test]
    fn family_member_text_is_neutral_negative() {
        let library = default_rule_library();
        let verdict = classify_by_rules("sister abuses hydrocodone", &library).unwrap();
        assert_eq!(verdict.label, Label::Negative);
        assert_eq!(verdict.matched_category, RuleCategory::Neutral);
    }

    #[test]
    fn unmatched_text_returns_none() {
        let library = default_rule_library();
        assert!(classify_by_rules("completely unrelated cardiology text", &library).is_none());
        assert!(explain_rules("completely unrelated cardiology text", &library).is_empty());
    }

    #[test]
    fn case_insensitive_matching() {
        let library = default_rule_library();
        assert!(classify_by_rules("FORMER OPIOID DEPENDENCE", &library).is_some());
    }

    #[test]
    fn within_category_order_changes_rule_not_verdict() {
        let a = parse_rule_library("g1\tGeneralPositive\topioid abuse\ng2\tGeneralPositive\tabuse\n", "t").unwrap();
        let b = parse_rule_library("g2\tGeneralPositive\tabuse\ng1\tGeneralPositive\topioid abuse\n", "t").unwrap();
        let va = classify_by_rules("opioid abuse noted", &a).unwrap();
        let vb = classify_by_rules("opioid abuse noted", &b).unwrap();
        assert_eq!(va.label, vb.label);
        assert_eq!(va.matched_category, vb.matched_category);
        assert_ne!(va.matched_rule, vb.matched_rule);
    }
}
