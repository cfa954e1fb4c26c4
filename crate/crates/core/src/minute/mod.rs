//! Design minutes: the record of a review, grouped by illocutionary force.

mod render;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{Annotation, DiscussionEntry, ForceKind, IllocutionaryForce, Status, Utterance};
use crate::canonical;
use crate::geometry::{anchor_to_point, Anchor, Mesh, Vec3};
use crate::ids::{derived_uuid, AnnotationId, DocumentId, MinuteId, ParticipantId, SessionId};
use crate::session::{Camera, ReviewSession};
use crate::store::{AnnotationStore, Query, StoreError};

pub use render::{render_minute, MinuteFormat};

/// Section order of every minute.
pub const SECTION_ORDER: [ForceKind; 4] = [
    ForceKind::Validation,
    ForceKind::Proposition,
    ForceKind::Evaluation,
    ForceKind::Clarification,
];

/// Distance of the default camera from its target, in bounding-sphere radii.
pub const DEFAULT_CAMERA_DISTANCE: f64 = 3.0;

#[derive(Debug, Error)]
pub enum MinuteError {
    #[error("session is still open")]
    SessionStillOpen,
    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSnapshot {
    pub id: AnnotationId,
    pub force: IllocutionaryForce,
    pub utterance: Utterance,
    pub status: Status,
    pub author: ParticipantId,
    pub anchor: Anchor,
}

impl From<&Annotation> for AnnotationSnapshot {
    fn from(a: &Annotation) -> Self {
        AnnotationSnapshot {
            id: a.id,
            force: a.force,
            utterance: a.utterance.clone(),
            status: a.status,
            author: a.author.clone(),
            anchor: a.anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteEntry {
    pub annotation: AnnotationSnapshot,
    pub viewpoint: Camera,
    pub thread: Vec<DiscussionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteSection {
    pub kind: ForceKind,
    pub entries: Vec<MinuteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMinute {
    pub id: MinuteId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionId>,
    pub document: DocumentId,
    pub revision: u32,
    pub generated_at: DateTime<Utc>,
    pub sections: Vec<MinuteSection>,
}

impl DesignMinute {
    pub fn entries(&self) -> impl Iterator<Item = &MinuteEntry> {
        self.sections.iter().flat_map(|s| s.entries.iter())
    }

    pub fn section(&self, kind: ForceKind) -> &MinuteSection {
        self.sections
            .iter()
            .find(|s| s.kind == kind)
            .expect("minutes always carry all four sections")
    }
}

pub enum MinuteSource<'a> {
    /// A closed review session.
    Session(&'a ReviewSession),
    /// An ad-hoc record of a document revision, filtered by `query`.
    Document {
        document: DocumentId,
        revision: u32,
        query: &'a Query,
        at: DateTime<Utc>,
    },
}

/// Id of the minute compiled from `session`; known before the minute exists.
pub fn session_minute_id(session: SessionId) -> MinuteId {
    MinuteId(derived_uuid("minute/session", session.0.as_bytes()))
}

/// Camera looking at the anchor from along its face normal.
pub fn default_camera(mesh: &Mesh, anchor: &Anchor) -> Camera {
    let target = anchor_to_point(mesh, anchor).unwrap_or_else(|_| mesh.bounding_sphere().0);
    let normal = if (anchor.face as usize) < mesh.face_count() {
        mesh.face_normal(anchor.face as usize)
    } else {
        Vec3::Z
    };
    let (_, radius) = mesh.bounding_sphere();
    let up = if normal.z.abs() < 0.9 { Vec3::Z } else { Vec3::Y };
    Camera {
        position: target + normal * (DEFAULT_CAMERA_DISTANCE * radius),
        target,
        up,
    }
}

/// Compiles a minute. Only public annotations are included, each once,
/// grouped by force in [`SECTION_ORDER`] and ordered by creation time
/// within a section. The result depends only on the store contents and the
/// source, so repeated generation is byte-identical.
pub fn generate_minute(store: &AnnotationStore, source: MinuteSource<'_>) -> Result<DesignMinute, MinuteError> {
    match source {
        MinuteSource::Session(session) => {
            if session.is_open() {
                return Err(MinuteError::SessionStillOpen);
            }
            let mut items = Vec::new();
            for (id, first_seq) in session.referenced_annotations() {
                // Private or destroyed annotations are simply absent.
                let Ok(annotation) = store.get(id, None) else {
                    continue;
                };
                let viewpoint = match session.viewpoint_before(first_seq) {
                    Some(camera) => camera,
                    None => {
                        let mesh = store.mesh(annotation.document, annotation.document_revision)?;
                        default_camera(&mesh, &annotation.anchor)
                    }
                };
                items.push((annotation, viewpoint));
            }
            Ok(assemble(
                session_minute_id(session.id),
                Some(session.id),
                session.document,
                session.revision,
                session.closed_at.unwrap_or(session.opened_at),
                items,
            ))
        }
        MinuteSource::Document {
            document,
            revision,
            query,
            at,
        } => {
            let doc = store
                .document(document)
                .map_err(|_| MinuteError::UnknownDocument(document))?;
            if !doc.alive {
                return Err(MinuteError::UnknownDocument(document));
            }
            let mesh = store.mesh(document, revision)?;
            let q = Query {
                document: Some(document),
                revision: Some(revision),
                ..query.clone()
            };
            let items = store
                .query(&q, None)?
                .into_iter()
                .map(|a| {
                    let camera = default_camera(&mesh, &a.anchor);
                    (a, camera)
                })
                .collect();
            let mut key = document.0.as_bytes().to_vec();
            key.extend_from_slice(&revision.to_le_bytes());
            key.extend_from_slice(&canonical::to_vec(&q).expect("queries serialize"));
            key.extend_from_slice(at.to_rfc3339().as_bytes());
            Ok(assemble(
                MinuteId(derived_uuid("minute/document", &key)),
                None,
                document,
                revision,
                at,
                items,
            ))
        }
    }
}

fn assemble(
    id: MinuteId,
    session: Option<SessionId>,
    document: DocumentId,
    revision: u32,
    generated_at: DateTime<Utc>,
    mut items: Vec<(Annotation, Camera)>,
) -> DesignMinute {
    items.sort_by_key(|(a, _)| (a.created_at, a.id));
    let sections = SECTION_ORDER
        .iter()
        .map(|&kind| MinuteSection {
            kind,
            entries: items
                .iter()
                .filter(|(a, _)| a.force.kind == kind)
                .map(|(a, camera)| MinuteEntry {
                    annotation: AnnotationSnapshot::from(a),
                    viewpoint: *camera,
                    thread: a.thread.clone(),
                })
                .collect(),
        })
        .collect();
    DesignMinute {
        id,
        session,
        document,
        revision,
        generated_at,
        sections,
    }
}
