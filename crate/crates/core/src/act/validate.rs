use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ForceKind, IllocutionaryForce, RefKind, Utterance};

/// A broken well-formedness rule. Ordering follows the rule table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    ClarificationKindRequired,
    ClarificationKindForbidden,
    PolarityForbidden,
    EmptyUtterance,
    AnswersRequiresProposition,
    ValidatesRequiresValidation,
    ValidatesTargetNotProposition,
}

impl Violation {
    pub fn code(self) -> &'static str {
        match self {
            Violation::ClarificationKindRequired => "CLARIFICATION_KIND_REQUIRED",
            Violation::ClarificationKindForbidden => "CLARIFICATION_KIND_FORBIDDEN",
            Violation::PolarityForbidden => "POLARITY_FORBIDDEN",
            Violation::EmptyUtterance => "EMPTY_UTTERANCE",
            Violation::AnswersRequiresProposition => "ANSWERS_REQUIRES_PROPOSITION",
            Violation::ValidatesRequiresValidation => "VALIDATES_REQUIRES_VALIDATION",
            Violation::ValidatesTargetNotProposition => "VALIDATES_TARGET_NOT_PROPOSITION",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Outcome of [`validate_act`]: empty means well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn contains(&self, v: Violation) -> bool {
        self.violations.contains(&v)
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.code()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        f.write_str(&self.codes().join(","))
    }
}

/// Checks a candidate act against every rule and reports all violations.
///
/// `references` lists, for each outgoing reference, the force kind of its
/// target and the reference kind.
pub fn validate_act(
    force: &IllocutionaryForce,
    utterance: &Utterance,
    references: &[(ForceKind, RefKind)],
) -> ValidationReport {
    let mut found = BTreeSet::new();

    match (force.kind, force.clarification_kind) {
        (ForceKind::Clarification, None) => {
            found.insert(Violation::ClarificationKindRequired);
        }
        (kind, Some(_)) if kind != ForceKind::Clarification => {
            found.insert(Violation::ClarificationKindForbidden);
        }
        _ => {}
    }
    if force.polarity.is_some() && force.kind != ForceKind::Evaluation {
        found.insert(Violation::PolarityForbidden);
    }
    if utterance.text.trim().is_empty() {
        found.insert(Violation::EmptyUtterance);
    }
    for &(target_kind, ref_kind) in references {
        match ref_kind {
            RefKind::Answers if force.kind != ForceKind::Proposition => {
                found.insert(Violation::AnswersRequiresProposition);
            }
            RefKind::Validates => {
                if force.kind != ForceKind::Validation {
                    found.insert(Violation::ValidatesRequiresValidation);
                }
                if target_kind != ForceKind::Proposition {
                    found.insert(Violation::ValidatesTargetNotProposition);
                }
            }
            _ => {}
        }
    }

    ValidationReport {
        violations: found.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::act::{ClarificationKind, ContentKind, Polarity};
    use crate::fixtures;

    #[test]
    fn exhaust_problem_identification_is_well_formed() {
        let (force, utterance) = fixtures::exhaust_act();
        assert!(validate_act(&force, &utterance, &[]).is_ok());
    }

    #[test]
    fn suspension_solution_proposition_answering_an_evaluation() {
        let (force, utterance) = fixtures::suspension_act();
        let report = validate_act(&force, &utterance, &[(ForceKind::Evaluation, RefKind::Answers)]);
        assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn clarification_needs_its_kind() {
        let force = IllocutionaryForce {
            kind: ForceKind::Clarification,
            clarification_kind: None,
            polarity: None,
        };
        let report = validate_act(&force, &Utterance::new("x", ContentKind::Other), &[]);
        assert_eq!(report.violations(), &[Violation::ClarificationKindRequired]);
    }

    #[test]
    fn blank_utterance_is_rejected() {
        let report = validate_act(
            &IllocutionaryForce::proposition(),
            &Utterance::new("   ", ContentKind::Other),
            &[],
        );
        assert_eq!(report.codes(), vec!["EMPTY_UTTERANCE"]);
    }

    #[test]
    fn every_violation_is_reported() {
        let force = IllocutionaryForce {
            kind: ForceKind::Proposition,
            clarification_kind: Some(ClarificationKind::Problem),
            polarity: Some(Polarity::Negative),
        };
        let report = validate_act(
            &force,
            &Utterance::new("\t\n", ContentKind::Other),
            &[
                (ForceKind::Evaluation, RefKind::Validates),
                (ForceKind::Validation, RefKind::Validates),
            ],
        );
        assert_eq!(
            report.violations(),
            &[
                Violation::ClarificationKindForbidden,
                Violation::PolarityForbidden,
                Violation::EmptyUtterance,
                Violation::ValidatesRequiresValidation,
                Violation::ValidatesTargetNotProposition,
            ]
        );
        assert_eq!(
            report.to_string(),
            "CLARIFICATION_KIND_FORBIDDEN,POLARITY_FORBIDDEN,EMPTY_UTTERANCE,VALIDATES_REQUIRES_VALIDATION,VALIDATES_TARGET_NOT_PROPOSITION"
        );
    }

    #[test]
    fn answers_must_come_from_a_proposition() {
        let report = validate_act(
            &IllocutionaryForce::evaluation(None),
            &Utterance::new("fine", ContentKind::Other),
            &[(ForceKind::Evaluation, RefKind::Answers)],
        );
        assert_eq!(report.violations(), &[Violation::AnswersRequiresProposition]);
    }

    #[test]
    fn clarifies_may_target_anything() {
        for target in ForceKind::ALL {
            let report = validate_act(
                &IllocutionaryForce::clarification(ClarificationKind::Solution),
                &Utterance::new("the tube is the left one", ContentKind::Other),
                &[(target, RefKind::Clarifies)],
            );
            assert!(report.is_ok());
        }
    }

    #[test]
    fn validation_of_a_proposition_is_well_formed() {
        let report = validate_act(
            &IllocutionaryForce::validation(),
            &Utterance::new("agreed, 40mm", ContentKind::Decision),
            &[(ForceKind::Proposition, RefKind::Validates)],
        );
        assert!(report.is_ok());
    }
}
