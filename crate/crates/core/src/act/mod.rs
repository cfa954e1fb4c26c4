//! The annotation act model.
//!
//! An annotation pairs an illocutionary force (what the author means to do:
//! propose, clarify, evaluate, validate) with an utterance (what is said).
//! This module holds those value types, the well-formedness rules, and the
//! lifecycle operations. Everything here is a pure value; persistence and id
//! allocation belong to the store.

mod lifecycle;
mod validate;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geometry::Anchor;
use crate::ids::{AnnotationId, DocumentId, ParticipantId};

pub use lifecycle::{
    append_reply, create_annotation, publish, transition_permission, transition_status, ActError, AnnotationDraft,
    Permission,
};
pub use validate::{validate_act, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ForceKind {
    Proposition,
    Clarification,
    Evaluation,
    Validation,
}

impl ForceKind {
    pub const ALL: [ForceKind; 4] = [
        ForceKind::Proposition,
        ForceKind::Clarification,
        ForceKind::Evaluation,
        ForceKind::Validation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ForceKind::Proposition => "Proposition",
            ForceKind::Clarification => "Clarification",
            ForceKind::Evaluation => "Evaluation",
            ForceKind::Validation => "Validation",
        }
    }
}

impl fmt::Display for ForceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a clarification clarifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClarificationKind {
    Solution,
    Problem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

/// The intention behind an annotation.
///
/// Fields are public so that candidate (possibly ill-formed) forces can be
/// built and checked with [`validate_act`]; the constructors only build
/// well-formed ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IllocutionaryForce {
    pub kind: ForceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarification_kind: Option<ClarificationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
}

impl IllocutionaryForce {
    pub fn proposition() -> Self {
        IllocutionaryForce {
            kind: ForceKind::Proposition,
            clarification_kind: None,
            polarity: None,
        }
    }

    pub fn clarification(of: ClarificationKind) -> Self {
        IllocutionaryForce {
            kind: ForceKind::Clarification,
            clarification_kind: Some(of),
            polarity: None,
        }
    }

    pub fn evaluation(polarity: Option<Polarity>) -> Self {
        IllocutionaryForce {
            kind: ForceKind::Evaluation,
            clarification_kind: None,
            polarity,
        }
    }

    pub fn validation() -> Self {
        IllocutionaryForce {
            kind: ForceKind::Validation,
            clarification_kind: None,
            polarity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContentKind {
    Constraint,
    Action,
    Decision,
    Other,
}

/// What the annotation says.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub content_kind: ContentKind,
}

impl Utterance {
    pub fn new(text: impl Into<String>, content_kind: ContentKind) -> Self {
        Utterance {
            text: text.into(),
            content_kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sphere {
    Private,
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Draft,
    Open,
    Answered,
    Validated,
    Rejected,
    Archived,
}

impl Status {
    pub const ALL: [Status; 6] = [
        Status::Draft,
        Status::Open,
        Status::Answered,
        Status::Validated,
        Status::Rejected,
        Status::Archived,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Architect,
    #[serde(rename = "PMS")]
    Pms,
    Designer,
    ScriptWriter,
    Industrial,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Architect,
        Role::Pms,
        Role::Designer,
        Role::ScriptWriter,
        Role::Industrial,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RefKind {
    /// A proposition answering an evaluation or problem.
    Answers,
    /// A validation of a proposition.
    Validates,
    Clarifies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub target: AnnotationId,
    pub kind: RefKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionEntry {
    pub author: ParticipantId,
    pub at: DateTime<Utc>,
    pub text: String,
}

/// One recorded status change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub from: Status,
    pub to: Status,
    pub actor: ParticipantId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: AnnotationId,
    pub document: DocumentId,
    pub document_revision: u32,
    pub author: ParticipantId,
    pub created_at: DateTime<Utc>,
    pub force: IllocutionaryForce,
    pub utterance: Utterance,
    pub anchor: Anchor,
    pub sphere: Sphere,
    pub status: Status,
    /// Set when a revision change could not relocate the anchor.
    #[serde(default)]
    pub orphaned: bool,
    /// Store version this value was read at; 0 for never-saved values.
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub thread: Vec<DiscussionEntry>,
    #[serde(default)]
    pub references: Vec<Reference>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<StatusChange>,
}

impl Annotation {
    pub fn is_visible_to(&self, viewer: Option<&ParticipantId>) -> bool {
        self.sphere == Sphere::Public || viewer == Some(&self.author)
    }
}
