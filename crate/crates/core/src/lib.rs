//! Speech-act annotation of 3D design models.
//!
//! Every annotation is an illocutionary force (propose, clarify, evaluate,
//! validate) applied to an utterance, anchored to a point on a mesh surface,
//! discussed in a thread, and compiled into design minutes.
//!
//! - [`act`]: the annotation model, its well-formedness rules and lifecycle.
//! - [`geometry`]: mesh loading, ray picking and anchor remapping.
//! - [`store`]: versioned storage, queries, and set import/export.
//! - [`session`]: synchronous review sessions and their event log.
//! - [`minute`]: design-minute generation and rendering.

pub mod act;
pub mod canonical;
pub mod clock;
pub mod fixtures;
pub mod geometry;
pub mod ids;
pub mod minute;
pub mod session;
pub mod store;

pub use act::{
    Annotation, AnnotationDraft, ClarificationKind, ContentKind, ForceKind, IllocutionaryForce, Polarity, RefKind,
    Reference, Role, Sphere, Status, Utterance,
};
pub use geometry::{Anchor, Mesh, MeshFormat, Ray, Vec3};
pub use ids::{AnnotationId, DocumentId, MinuteId, ParticipantId, SessionId};
pub use store::{AnnotationStore, Query, StoreError, StoreOptions};
