use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate_act, Annotation, DiscussionEntry, ForceKind, IllocutionaryForce, Reference, Role, Sphere, Status,
    StatusChange, Utterance, ValidationReport,
};
use crate::geometry::{Anchor, GeometryError, Mesh};
use crate::ids::{AnnotationId, DocumentId, ParticipantId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActError {
    #[error("ill-formed annotation act: {0}")]
    InvalidAct(ValidationReport),
    #[error(transparent)]
    InvalidAnchor(#[from] GeometryError),
    #[error("referenced annotation {0} does not exist")]
    UnknownReference(AnnotationId),
    #[error("reply text is empty")]
    EmptyReply,
    #[error("annotation is archived")]
    AnnotationArchived,
    #[error("reply at {at} precedes the last thread entry at {last}")]
    ReplyOutOfOrder { at: DateTime<Utc>, last: DateTime<Utc> },
    #[error("no transition from {from:?} to {to:?}")]
    ForbiddenTransition { from: Status, to: Status },
    #[error("{actor} may not move an annotation from {from:?} to {to:?}")]
    ForbiddenRole {
        actor: ParticipantId,
        from: Status,
        to: Status,
    },
    #[error("annotation has neither an answer nor a reply")]
    Unanswered,
    #[error("annotation is already public")]
    AlreadyPublic,
}

/// Caller input for a new annotation. Ids and timestamps are supplied
/// separately by whoever owns them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDraft {
    pub author: ParticipantId,
    pub document: DocumentId,
    pub document_revision: u32,
    pub force: IllocutionaryForce,
    pub utterance: Utterance,
    pub anchor: Anchor,
    pub sphere: Sphere,
    #[serde(default)]
    pub references: Vec<Reference>,
}

/// Builds a fresh annotation. `mesh` is the document mesh at the draft's
/// revision; `target_kind` resolves the force of each referenced annotation.
pub fn create_annotation(
    draft: AnnotationDraft,
    mesh: &Mesh,
    target_kind: impl Fn(AnnotationId) -> Option<ForceKind>,
    id: AnnotationId,
    now: DateTime<Utc>,
) -> Result<Annotation, ActError> {
    let mut resolved = Vec::with_capacity(draft.references.len());
    for r in &draft.references {
        let kind = target_kind(r.target).ok_or(ActError::UnknownReference(r.target))?;
        resolved.push((kind, r.kind));
    }
    let report = validate_act(&draft.force, &draft.utterance, &resolved);
    if !report.is_ok() {
        return Err(ActError::InvalidAct(report));
    }
    draft.anchor.validate(mesh)?;

    let status = match draft.sphere {
        Sphere::Private => Status::Draft,
        Sphere::Public => Status::Open,
    };
    Ok(Annotation {
        id,
        document: draft.document,
        document_revision: draft.document_revision,
        author: draft.author,
        created_at: now,
        force: draft.force,
        utterance: draft.utterance,
        anchor: draft.anchor,
        sphere: draft.sphere,
        status,
        orphaned: false,
        version: 0,
        thread: Vec::new(),
        references: draft.references,
        audit: Vec::new(),
    })
}

pub fn append_reply(
    annotation: &Annotation,
    author: &ParticipantId,
    text: &str,
    at: DateTime<Utc>,
) -> Result<Annotation, ActError> {
    if text.trim().is_empty() {
        return Err(ActError::EmptyReply);
    }
    if annotation.status == Status::Archived {
        return Err(ActError::AnnotationArchived);
    }
    if let Some(last) = annotation.thread.last() {
        if at < last.at {
            return Err(ActError::ReplyOutOfOrder { at, last: last.at });
        }
    }
    let mut next = annotation.clone();
    next.thread.push(DiscussionEntry {
        author: author.clone(),
        at,
        text: text.to_owned(),
    });
    Ok(next)
}

/// Who may take a status edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permission {
    /// The edge is not in the graph.
    NoEdge,
    /// Only the annotation's author (publishing a draft).
    Author,
    AnyRole,
    Only(Role),
}

/// The status graph with its role gates.
pub fn transition_permission(from: Status, to: Status) -> Permission {
    use Status::*;
    match (from, to) {
        (Draft, Open) => Permission::Author,
        (Open, Answered) => Permission::AnyRole,
        (Open | Answered, Validated | Rejected) => Permission::Only(Role::Architect),
        (Validated | Rejected, Archived) => Permission::Only(Role::Pms),
        _ => Permission::NoEdge,
    }
}

/// Moves an annotation along the status graph.
///
/// `incoming_answers` is the number of stored annotations holding an
/// `Answers` reference to this one; `Open → Answered` needs one of those or
/// a thread entry. `Draft → Open` is the same as [`publish`].
pub fn transition_status(
    annotation: &Annotation,
    actor: &ParticipantId,
    role: Role,
    to: Status,
    incoming_answers: usize,
    at: DateTime<Utc>,
) -> Result<Annotation, ActError> {
    let from = annotation.status;
    let allowed = match transition_permission(from, to) {
        Permission::NoEdge => return Err(ActError::ForbiddenTransition { from, to }),
        Permission::Author => *actor == annotation.author,
        Permission::AnyRole => true,
        Permission::Only(r) => r == role,
    };
    if !allowed {
        return Err(ActError::ForbiddenRole {
            actor: actor.clone(),
            from,
            to,
        });
    }
    if to == Status::Answered && incoming_answers == 0 && annotation.thread.is_empty() {
        return Err(ActError::Unanswered);
    }

    let mut next = annotation.clone();
    if from == Status::Draft {
        next.sphere = Sphere::Public;
    }
    next.status = to;
    next.audit.push(StatusChange {
        from,
        to,
        actor: actor.clone(),
        role: Some(role),
        at,
    });
    Ok(next)
}

/// Private/Draft → Public/Open. There is no inverse.
pub fn publish(annotation: &Annotation, at: DateTime<Utc>) -> Result<Annotation, ActError> {
    if annotation.sphere == Sphere::Public {
        return Err(ActError::AlreadyPublic);
    }
    let mut next = annotation.clone();
    next.sphere = Sphere::Public;
    next.status = Status::Open;
    next.audit.push(StatusChange {
        from: annotation.status,
        to: Status::Open,
        actor: annotation.author.clone(),
        role: None,
        at,
    });
    Ok(next)
}
