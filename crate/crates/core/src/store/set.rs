//! Annotation-set files: the portable, canonical-JSON exchange format.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotationStore, Entry, StoreError};
use crate::act::{
    validate_act, Annotation, DiscussionEntry, ForceKind, IllocutionaryForce, Reference, Sphere, Status, Utterance,
};
use crate::canonical;
use crate::geometry::{Anchor, ContentHash, Mesh};
use crate::ids::{AnnotationId, DocumentId, ParticipantId};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSnapshot {
    pub id: DocumentId,
    pub name: String,
    pub revision: u32,
    pub content_hash: ContentHash,
}

/// An annotation as it appears in a set file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
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
    pub orphaned: bool,
    pub version: u64,
    pub thread: Vec<DiscussionEntry>,
    pub references: Vec<Reference>,
}

impl From<&Annotation> for AnnotationRecord {
    fn from(a: &Annotation) -> Self {
        AnnotationRecord {
            id: a.id,
            document: a.document,
            document_revision: a.document_revision,
            author: a.author.clone(),
            created_at: a.created_at,
            force: a.force,
            utterance: a.utterance.clone(),
            anchor: a.anchor,
            sphere: a.sphere,
            status: a.status,
            orphaned: a.orphaned,
            version: a.version,
            thread: a.thread.clone(),
            references: a.references.clone(),
        }
    }
}

impl From<AnnotationRecord> for Annotation {
    fn from(r: AnnotationRecord) -> Self {
        Annotation {
            id: r.id,
            document: r.document,
            document_revision: r.document_revision,
            author: r.author,
            created_at: r.created_at,
            force: r.force,
            utterance: r.utterance,
            anchor: r.anchor,
            sphere: r.sphere,
            status: r.status,
            orphaned: r.orphaned,
            version: r.version,
            thread: r.thread,
            references: r.references,
            audit: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub schema_version: u64,
    pub document: DocumentSnapshot,
    pub annotations: Vec<AnnotationRecord>,
}

impl AnnotationSet {
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        canonical::to_vec(self).expect("annotation sets always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail")]
pub enum SkipReason {
    /// The entry is not a decodable annotation.
    Malformed(String),
    /// The force does not decode or the act breaks a well-formedness rule.
    InvalidAct(String),
    InvalidAnchor(String),
    UnknownReference(AnnotationId),
    UnknownRevision(u32),
    WrongDocument(DocumentId),
    AlreadyPresent,
}

impl SkipReason {
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::Malformed(_) => "Malformed",
            SkipReason::InvalidAct(_) => "InvalidAct",
            SkipReason::InvalidAnchor(_) => "InvalidAnchor",
            SkipReason::UnknownReference(_) => "UnknownReference",
            SkipReason::UnknownRevision(_) => "UnknownRevision",
            SkipReason::WrongDocument(_) => "WrongDocument",
            SkipReason::AlreadyPresent => "AlreadyPresent",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::Malformed(d) | SkipReason::InvalidAct(d) | SkipReason::InvalidAnchor(d) => {
                write!(f, "{}: {d}", self.code())
            }
            SkipReason::UnknownReference(id) => write!(f, "{}: {id}", self.code()),
            SkipReason::UnknownRevision(r) => write!(f, "{}: {r}", self.code()),
            SkipReason::WrongDocument(d) => write!(f, "{}: {d}", self.code()),
            SkipReason::AlreadyPresent => f.write_str(self.code()),
        }
    }
}

/// An entry of a set that was not imported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    /// Position in the file's `annotations` array.
    pub index: usize,
    pub id: Option<AnnotationId>,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    pub skipped: Vec<Skipped>,
}

/// A set file decoded entry by entry, so that one bad entry does not hide
/// the rest.
#[derive(Debug, Clone)]
pub struct ParsedSet {
    pub document: DocumentSnapshot,
    pub entries: Vec<Result<AnnotationRecord, Skipped>>,
}

impl ParsedSet {
    pub fn parse(bytes: &[u8]) -> Result<ParsedSet, StoreError> {
        let root: Value = serde_json::from_slice(bytes)?;
        let version = root
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| StoreError::Malformed("missing schema_version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(StoreError::SchemaUnsupported(version));
        }
        let document: DocumentSnapshot = serde_json::from_value(
            root.get("document")
                .cloned()
                .ok_or_else(|| StoreError::Malformed("missing document".into()))?,
        )
        .map_err(|e| StoreError::Malformed(format!("document: {e}")))?;
        let items = root
            .get("annotations")
            .and_then(Value::as_array)
            .ok_or_else(|| StoreError::Malformed("missing annotations array".into()))?;
        let entries = items.iter().enumerate().map(|(i, v)| decode_entry(i, v)).collect();
        Ok(ParsedSet { document, entries })
    }
}

fn decode_entry(index: usize, value: &Value) -> Result<AnnotationRecord, Skipped> {
    serde_json::from_value::<AnnotationRecord>(value.clone()).map_err(|e| {
        let id = value.get("id").and_then(Value::as_str).and_then(|s| s.parse().ok());
        let force_broken = value
            .get("force")
            .is_none_or(|f| serde_json::from_value::<IllocutionaryForce>(f.clone()).is_err());
        let reason = if force_broken {
            SkipReason::InvalidAct(format!("force: {e}"))
        } else {
            SkipReason::Malformed(e.to_string())
        };
        Skipped { index, id, reason }
    })
}

impl AnnotationStore {
    /// Canonical JSON of every annotation on `document`, all revisions,
    /// ordered by creation time then id.
    pub fn export_set(&self, document: DocumentId) -> Result<Vec<u8>, StoreError> {
        let shard = self.shard(document)?;
        let shard = shard.read();
        shard.ensure_alive()?;
        let latest = shard.doc.latest();
        let mut annotations: Vec<AnnotationRecord> = shard
            .entries
            .values()
            .map(|e| AnnotationRecord::from(&e.annotation))
            .collect();
        annotations.sort_by_key(|a| (a.created_at, a.id));
        let set = AnnotationSet {
            schema_version: SCHEMA_VERSION,
            document: DocumentSnapshot {
                id: shard.doc.id,
                name: shard.doc.name.clone(),
                revision: latest.revision,
                content_hash: latest.content_hash,
            },
            annotations,
        };
        Ok(set.to_canonical_bytes())
    }

    /// Imports a set file. Invalid entries are skipped with a reason, entries
    /// whose id is already stored are skipped as `AlreadyPresent`.
    ///
    /// If the store does not know the set's document, `mesh` must be given
    /// and must hash to the declared content hash; the document is then
    /// created with the set's id, name and revision number.
    pub fn import_set(&self, bytes: &[u8], mesh: Option<&Mesh>) -> Result<ImportReport, StoreError> {
        let parsed = ParsedSet::parse(bytes)?;
        let header = &parsed.document;

        let known = self.shards.read().get(&header.id).cloned();
        let shard = match known {
            Some(shard) => {
                {
                    let s = shard.read();
                    s.ensure_alive()?;
                    let stored = s.doc.revision(header.revision).ok_or(StoreError::UnknownRevision {
                        document: header.id,
                        revision: header.revision,
                    })?;
                    if stored.content_hash != header.content_hash {
                        return Err(StoreError::HashMismatch {
                            expected: stored.content_hash,
                            found: header.content_hash,
                        });
                    }
                }
                shard
            }
            None => {
                let mesh = mesh.ok_or(StoreError::UnknownDocument(header.id))?;
                if mesh.content_hash() != header.content_hash {
                    return Err(StoreError::HashMismatch {
                        expected: header.content_hash,
                        found: mesh.content_hash(),
                    });
                }
                self.insert_document(header.id, &header.name, header.revision, mesh.clone())?;
                self.shard(header.id)?
            }
        };

        let mut shard = shard.write();
        let mut kinds: HashMap<AnnotationId, ForceKind> = shard
            .entries
            .values()
            .map(|e| (e.annotation.id, e.annotation.force.kind))
            .collect();
        for record in parsed.entries.iter().flatten() {
            kinds.entry(record.id).or_insert(record.force.kind);
        }

        let mut report = ImportReport::default();
        for (index, entry) in parsed.entries.into_iter().enumerate() {
            let record = match entry {
                Ok(r) => r,
                Err(skipped) => {
                    report.skipped.push(skipped);
                    continue;
                }
            };
            let id = record.id;
            let skip = |reason| Skipped {
                index,
                id: Some(id),
                reason,
            };
            match check_import(&shard, &kinds, &record) {
                Ok(mesh) => {
                    let entry = match Entry::new(record.into(), &mesh) {
                        Ok(e) => e,
                        Err(e) => {
                            report.skipped.push(skip(SkipReason::InvalidAnchor(e.to_string())));
                            continue;
                        }
                    };
                    self.commit(&mut shard, entry)?;
                    report.imported += 1;
                }
                Err(reason) => report.skipped.push(skip(reason)),
            }
        }
        Ok(report)
    }
}

fn check_import(
    shard: &super::Shard,
    kinds: &HashMap<AnnotationId, ForceKind>,
    record: &AnnotationRecord,
) -> Result<Arc<Mesh>, SkipReason> {
    if record.document != shard.doc.id {
        return Err(SkipReason::WrongDocument(record.document));
    }
    if shard.entries.contains_key(&record.id) {
        return Err(SkipReason::AlreadyPresent);
    }
    let mut refs = Vec::with_capacity(record.references.len());
    for r in &record.references {
        let kind = kinds.get(&r.target).ok_or(SkipReason::UnknownReference(r.target))?;
        refs.push((*kind, r.kind));
    }
    let report = validate_act(&record.force, &record.utterance, &refs);
    if !report.is_ok() {
        return Err(SkipReason::InvalidAct(report.to_string()));
    }
    let mesh = shard
        .meshes
        .get(&record.document_revision)
        .ok_or(SkipReason::UnknownRevision(record.document_revision))?;
    record
        .anchor
        .validate(mesh)
        .map_err(|e| SkipReason::InvalidAnchor(e.to_string()))?;
    Ok(Arc::clone(mesh))
}
