//! Versioned persistence, indexing and retrieval of documents and
//! annotations.
//!
//! Documents are sharded: each has its own lock, so writers to different
//! documents never wait on each other, while readers share. Every mutation is
//! written to the [`Journal`] before the in-memory index changes hands, and
//! the index is rebuilt from the journal on open.

mod journal;
mod query;
mod set;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{self, validate_act, ActError, Annotation, AnnotationDraft, ForceKind, RefKind, Sphere};
use crate::clock::{Clock, SystemClock};
use crate::geometry::{
    anchor_to_point, remap_anchor, ContentHash, Mesh, MeshError, OrphanThreshold, RemapStatus, Vec3,
};
use crate::ids::{AnnotationId, DocumentId, IdSource, MinuteId, ParticipantId, RandomIds, SessionId};
use crate::minute::DesignMinute;

pub use journal::{FileJournal, Journal, MemoryJournal, Record};
pub use query::{Query, Region};
pub use set::{
    AnnotationRecord, AnnotationSet, DocumentSnapshot, ImportReport, ParsedSet, SkipReason, Skipped, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error("document {document} has no revision {revision}")]
    UnknownRevision { document: DocumentId, revision: u32 },
    #[error("annotation {0} not found")]
    NotFound(AnnotationId),
    #[error("version conflict: stored version is {current}")]
    VersionConflict { current: u64 },
    #[error(transparent)]
    Act(#[from] ActError),
    #[error("annotation {0} is public and cannot become private")]
    SphereRegression(AnnotationId),
    #[error("annotation {0}: existing thread entries cannot be changed or removed")]
    ThreadRewritten(AnnotationId),
    #[error("annotation {0} belongs to another document")]
    DocumentMismatch(AnnotationId),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unsupported annotation-set schema version {0}")]
    SchemaUnsupported(u64),
    #[error("mesh hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: ContentHash, found: ContentHash },
    #[error("unknown minute")]
    UnknownMinute,
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionInfo {
    pub revision: u32,
    pub content_hash: ContentHash,
    pub created_at: DateTime<Utc>,
}

/// A versioned document: its name and the mesh hash of each revision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRef {
    pub id: DocumentId,
    pub name: String,
    pub revisions: Vec<RevisionInfo>,
    pub alive: bool,
}

impl DocumentRef {
    pub fn latest(&self) -> &RevisionInfo {
        self.revisions.last().expect("documents have at least one revision")
    }

    pub fn revision(&self, revision: u32) -> Option<&RevisionInfo> {
        self.revisions.iter().find(|r| r.revision == revision)
    }
}

/// What [`AnnotationStore::add_revision`] did to existing annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionOutcome {
    pub revision: u32,
    pub remapped: Vec<(AnnotationId, RemapStatus)>,
}

/// Facts an update closure may need beyond the annotation itself.
#[derive(Debug, Clone, Copy)]
pub struct UpdateContext {
    pub now: DateTime<Utc>,
    /// Stored annotations holding an `Answers` reference to this one.
    pub incoming_answers: usize,
}

pub struct StoreOptions {
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<dyn IdSource>,
    pub orphan_threshold: OrphanThreshold,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            clock: Arc::new(SystemClock),
            ids: Arc::new(RandomIds),
            orphan_threshold: OrphanThreshold::DEFAULT,
        }
    }
}

/// A stored annotation with its precomputed search data.
#[derive(Debug, Clone)]
struct Entry {
    annotation: Annotation,
    /// Lower-cased utterance followed by each thread entry.
    search_text: Vec<String>,
    /// Reconstructed anchor position on the annotation's revision.
    point: Vec3,
}

impl Entry {
    fn new(annotation: Annotation, mesh: &Mesh) -> Result<Self, StoreError> {
        let point = anchor_to_point(mesh, &annotation.anchor).map_err(ActError::from)?;
        let search_text = std::iter::once(&annotation.utterance.text)
            .chain(annotation.thread.iter().map(|e| &e.text))
            .map(|t| t.to_lowercase())
            .collect();
        Ok(Entry {
            annotation,
            search_text,
            point,
        })
    }
}

struct Shard {
    doc: DocumentRef,
    meshes: BTreeMap<u32, Arc<Mesh>>,
    entries: HashMap<AnnotationId, Entry>,
}

impl Shard {
    fn mesh(&self, revision: u32) -> Result<&Arc<Mesh>, StoreError> {
        self.meshes.get(&revision).ok_or(StoreError::UnknownRevision {
            document: self.doc.id,
            revision,
        })
    }

    fn ensure_alive(&self) -> Result<(), StoreError> {
        if self.doc.alive {
            Ok(())
        } else {
            Err(StoreError::UnknownDocument(self.doc.id))
        }
    }

    /// Force kind of a reference target, as seen by `viewer`.
    fn target_kind(&self, target: AnnotationId, viewer: &ParticipantId) -> Option<ForceKind> {
        self.entries
            .get(&target)
            .filter(|e| e.annotation.is_visible_to(Some(viewer)))
            .map(|e| e.annotation.force.kind)
    }

    fn incoming_answers(&self, id: AnnotationId) -> usize {
        self.entries
            .values()
            .filter(|e| {
                e.annotation
                    .references
                    .iter()
                    .any(|r| r.target == id && r.kind == RefKind::Answers)
            })
            .count()
    }

    /// All checks a write must pass, given the version the writer read.
    fn check_write(&self, next: &Annotation) -> Result<Entry, StoreError> {
        self.ensure_alive()?;
        if next.document != self.doc.id {
            return Err(StoreError::DocumentMismatch(next.id));
        }
        let current = self.entries.get(&next.id);
        let current_version = current.map_or(0, |e| e.annotation.version);
        if next.version != current_version {
            return Err(StoreError::VersionConflict {
                current: current_version,
            });
        }
        if let Some(prev) = current.map(|e| &e.annotation) {
            if prev.sphere == Sphere::Public && next.sphere == Sphere::Private {
                return Err(StoreError::SphereRegression(next.id));
            }
            if next.thread.len() < prev.thread.len() || next.thread[..prev.thread.len()] != prev.thread[..] {
                return Err(StoreError::ThreadRewritten(next.id));
            }
        }
        let mut refs = Vec::with_capacity(next.references.len());
        for r in &next.references {
            let kind = self
                .target_kind(r.target, &next.author)
                .ok_or(ActError::UnknownReference(r.target))?;
            refs.push((kind, r.kind));
        }
        let report = validate_act(&next.force, &next.utterance, &refs);
        if !report.is_ok() {
            return Err(ActError::InvalidAct(report).into());
        }
        let mesh = self.mesh(next.document_revision)?;
        let mut stored = next.clone();
        stored.version = current_version + 1;
        Entry::new(stored, mesh)
    }
}

pub struct AnnotationStore {
    journal: Box<dyn Journal>,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdSource>,
    orphan_threshold: OrphanThreshold,
    shards: RwLock<HashMap<DocumentId, Arc<RwLock<Shard>>>>,
    owners: RwLock<HashMap<AnnotationId, DocumentId>>,
    minutes: RwLock<HashMap<MinuteId, DesignMinute>>,
}

impl AnnotationStore {
    /// Opens a store over `journal`, rebuilding the index from its records.
    pub fn open(journal: Box<dyn Journal>, options: StoreOptions) -> Result<Self, StoreError> {
        let store = AnnotationStore {
            journal,
            clock: options.clock,
            ids: options.ids,
            orphan_threshold: options.orphan_threshold,
            shards: RwLock::new(HashMap::new()),
            owners: RwLock::new(HashMap::new()),
            minutes: RwLock::new(HashMap::new()),
        };
        store.rebuild()?;
        Ok(store)
    }

    pub fn in_memory(options: StoreOptions) -> Self {
        Self::open(Box::new(MemoryJournal::new()), options).expect("an empty journal replays")
    }

    pub fn open_dir(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self, StoreError> {
        Self::open(Box::new(FileJournal::open(dir)?), options)
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn ids(&self) -> &Arc<dyn IdSource> {
        &self.ids
    }

    pub fn orphan_threshold(&self) -> OrphanThreshold {
        self.orphan_threshold
    }

    fn rebuild(&self) -> Result<(), StoreError> {
        let mut shards: HashMap<DocumentId, Shard> = HashMap::new();
        let mut minutes = HashMap::new();
        for record in self.journal.replay()? {
            match record {
                Record::Document { document } => {
                    let shard = shards.entry(document.id).or_insert_with(|| Shard {
                        doc: document.clone(),
                        meshes: BTreeMap::new(),
                        entries: HashMap::new(),
                    });
                    for rev in &document.revisions {
                        if let std::collections::btree_map::Entry::Vacant(e) = shard.meshes.entry(rev.revision) {
                            let mesh = self.journal.load_mesh(&rev.content_hash)?;
                            e.insert(Arc::new(mesh));
                        }
                    }
                    if !document.alive {
                        shard.entries.clear();
                    }
                    shard.doc = document;
                }
                Record::Annotation { annotation } => {
                    let shard = shards
                        .get_mut(&annotation.document)
                        .ok_or(StoreError::UnknownDocument(annotation.document))?;
                    let mesh = Arc::clone(shard.mesh(annotation.document_revision)?);
                    let entry = Entry::new(*annotation, &mesh)?;
                    shard.entries.insert(entry.annotation.id, entry);
                }
                Record::Minute { minute } => {
                    minutes.insert(minute.id, *minute);
                }
            }
        }
        let mut owners = self.owners.write();
        for (id, shard) in &shards {
            owners.extend(shard.entries.keys().map(|a| (*a, *id)));
        }
        *self.shards.write() = shards
            .into_iter()
            .map(|(id, shard)| (id, Arc::new(RwLock::new(shard))))
            .collect();
        *self.minutes.write() = minutes;
        Ok(())
    }

    fn shard(&self, id: DocumentId) -> Result<Arc<RwLock<Shard>>, StoreError> {
        self.shards
            .read()
            .get(&id)
            .cloned()
            .ok_or(StoreError::UnknownDocument(id))
    }

    fn shard_of(&self, id: AnnotationId) -> Result<Arc<RwLock<Shard>>, StoreError> {
        let doc = *self.owners.read().get(&id).ok_or(StoreError::NotFound(id))?;
        self.shard(doc)
    }

    fn commit(&self, shard: &mut Shard, entry: Entry) -> Result<u64, StoreError> {
        self.journal.append(&Record::Annotation {
            annotation: Box::new(entry.annotation.clone()),
        })?;
        let id = entry.annotation.id;
        let version = entry.annotation.version;
        shard.entries.insert(id, entry);
        self.owners.write().insert(id, shard.doc.id);
        Ok(version)
    }

    pub fn put_document(&self, name: &str, mesh: Mesh) -> Result<DocumentRef, StoreError> {
        let id = DocumentId(self.ids.next_uuid());
        self.insert_document(id, name, 1, mesh)
    }

    fn insert_document(
        &self,
        id: DocumentId,
        name: &str,
        revision: u32,
        mesh: Mesh,
    ) -> Result<DocumentRef, StoreError> {
        let doc = DocumentRef {
            id,
            name: name.to_owned(),
            revisions: vec![RevisionInfo {
                revision,
                content_hash: mesh.content_hash(),
                created_at: self.clock.now(),
            }],
            alive: true,
        };
        self.journal.put_mesh(&mesh)?;
        self.journal.append(&Record::Document { document: doc.clone() })?;
        let shard = Shard {
            doc: doc.clone(),
            meshes: BTreeMap::from([(revision, Arc::new(mesh))]),
            entries: HashMap::new(),
        };
        self.shards.write().insert(id, Arc::new(RwLock::new(shard)));
        Ok(doc)
    }

    /// Appends a revision and moves every annotation of the previous
    /// revision onto the new mesh. Annotations that cannot be relocated keep
    /// their anchor and revision and are flagged as orphaned.
    pub fn add_revision(&self, document: DocumentId, mesh: Mesh) -> Result<RevisionOutcome, StoreError> {
        let shard = self.shard(document)?;
        let mut shard = shard.write();
        shard.ensure_alive()?;
        let previous = shard.doc.latest().revision;
        let revision = previous + 1;
        let old_mesh = Arc::clone(shard.mesh(previous)?);
        let new_mesh = Arc::new(mesh);

        let mut doc = shard.doc.clone();
        doc.revisions.push(RevisionInfo {
            revision,
            content_hash: new_mesh.content_hash(),
            created_at: self.clock.now(),
        });
        self.journal.put_mesh(&new_mesh)?;
        self.journal.append(&Record::Document { document: doc.clone() })?;
        shard.doc = doc;
        shard.meshes.insert(revision, Arc::clone(&new_mesh));

        let mut ids: Vec<AnnotationId> = shard
            .entries
            .values()
            .filter(|e| e.annotation.document_revision == previous)
            .map(|e| e.annotation.id)
            .collect();
        ids.sort();
        let mut remapped = Vec::with_capacity(ids.len());
        for id in ids {
            let mut next = shard.entries[&id].annotation.clone();
            let (anchor, status) =
                remap_anchor(&old_mesh, &new_mesh, &next.anchor, self.orphan_threshold).map_err(ActError::from)?;
            match status {
                RemapStatus::Orphaned => next.orphaned = true,
                _ => {
                    next.anchor = anchor;
                    next.document_revision = revision;
                    next.orphaned = false;
                }
            }
            next.version += 1;
            let mesh = if next.orphaned { &old_mesh } else { &new_mesh };
            let entry = Entry::new(next, mesh)?;
            self.commit(&mut shard, entry)?;
            remapped.push((id, status));
        }
        Ok(RevisionOutcome { revision, remapped })
    }

    /// The document, including retired ones (`alive == false`).
    pub fn document(&self, id: DocumentId) -> Result<DocumentRef, StoreError> {
        Ok(self.shard(id)?.read().doc.clone())
    }

    /// Live documents ordered by name, then id.
    pub fn documents(&self) -> Vec<DocumentRef> {
        let mut docs: Vec<DocumentRef> = self
            .shards
            .read()
            .values()
            .map(|s| s.read().doc.clone())
            .filter(|d| d.alive)
            .collect();
        docs.sort_by(|a, b| (&a.name, a.id).cmp(&(&b.name, b.id)));
        docs
    }

    pub fn mesh(&self, document: DocumentId, revision: u32) -> Result<Arc<Mesh>, StoreError> {
        let shard = self.shard(document)?;
        let shard = shard.read();
        shard.ensure_alive()?;
        Ok(Arc::clone(shard.mesh(revision)?))
    }

    /// Builds, validates and saves a new annotation (stored at version 1).
    pub fn create(&self, draft: AnnotationDraft) -> Result<Annotation, StoreError> {
        let shard = self.shard(draft.document)?;
        let mut shard = shard.write();
        shard.ensure_alive()?;
        let mesh = Arc::clone(shard.mesh(draft.document_revision)?);
        let author = draft.author.clone();
        let annotation = act::create_annotation(
            draft,
            &mesh,
            |target| shard.target_kind(target, &author),
            AnnotationId(self.ids.next_uuid()),
            self.clock.now(),
        )?;
        let entry = shard.check_write(&annotation)?;
        let stored = entry.annotation.clone();
        self.commit(&mut shard, entry)?;
        Ok(stored)
    }

    /// Optimistic write: `annotation.version` must equal the stored version
    /// (0 for a new annotation). Returns the new stored version.
    pub fn save(&self, annotation: &Annotation) -> Result<u64, StoreError> {
        let shard = self.shard(annotation.document)?;
        let mut shard = shard.write();
        if let Some(owner) = self.owners.read().get(&annotation.id) {
            if *owner != annotation.document {
                return Err(StoreError::DocumentMismatch(annotation.id));
            }
        }
        let entry = shard.check_write(annotation)?;
        self.commit(&mut shard, entry)
    }

    /// Atomic read-modify-write of one annotation. The closure sees the
    /// current stored value; the result is saved as the next version. Hidden
    /// annotations (private to someone other than `viewer`) are `NotFound`.
    pub fn update<F>(&self, id: AnnotationId, viewer: &ParticipantId, f: F) -> Result<Annotation, StoreError>
    where
        F: FnOnce(&Annotation, UpdateContext) -> Result<Annotation, ActError>,
    {
        let shard = self.shard_of(id)?;
        let mut shard = shard.write();
        shard.ensure_alive()?;
        let current = match shard.entries.get(&id) {
            Some(e) if e.annotation.is_visible_to(Some(viewer)) => e.annotation.clone(),
            _ => return Err(StoreError::NotFound(id)),
        };
        let ctx = UpdateContext {
            now: self.clock.now(),
            incoming_answers: shard.incoming_answers(id),
        };
        let next = f(&current, ctx)?;
        let entry = shard.check_write(&next)?;
        let stored = entry.annotation.clone();
        self.commit(&mut shard, entry)?;
        Ok(stored)
    }

    /// Fetch one annotation if `viewer` may see it.
    pub fn get(&self, id: AnnotationId, viewer: Option<&ParticipantId>) -> Result<Annotation, StoreError> {
        let shard = self.shard_of(id)?;
        let shard = shard.read();
        match shard.entries.get(&id) {
            Some(e) if shard.doc.alive && e.annotation.is_visible_to(viewer) => Ok(e.annotation.clone()),
            _ => Err(StoreError::NotFound(id)),
        }
    }

    /// Every stored annotation regardless of visibility, ordered by
    /// creation time then id. For audits and operator tooling.
    pub fn all_annotations(&self) -> Vec<Annotation> {
        let shards: Vec<_> = self.shards.read().values().cloned().collect();
        let mut out: Vec<Annotation> = shards
            .iter()
            .flat_map(|s| {
                let s = s.read();
                s.entries.values().map(|e| e.annotation.clone()).collect::<Vec<_>>()
            })
            .collect();
        out.sort_by_key(|a| (a.created_at, a.id));
        out
    }

    /// Retires a document and destroys its annotations; returns how many.
    pub fn retire_document(&self, id: DocumentId) -> Result<usize, StoreError> {
        let shard = self.shard(id)?;
        let mut shard = shard.write();
        shard.ensure_alive()?;
        let mut doc = shard.doc.clone();
        doc.alive = false;
        self.journal.append(&Record::Document { document: doc.clone() })?;
        let count = shard.entries.len();
        {
            let mut owners = self.owners.write();
            for a in shard.entries.keys() {
                owners.remove(a);
            }
        }
        shard.entries.clear();
        shard.doc = doc;
        Ok(count)
    }

    pub fn save_minute(&self, minute: &DesignMinute) -> Result<(), StoreError> {
        self.journal.append(&Record::Minute {
            minute: Box::new(minute.clone()),
        })?;
        self.minutes.write().insert(minute.id, minute.clone());
        Ok(())
    }

    pub fn minute(&self, id: MinuteId) -> Result<DesignMinute, StoreError> {
        self.minutes.read().get(&id).cloned().ok_or(StoreError::UnknownMinute)
    }

    pub fn minute_for_session(&self, session: SessionId) -> Result<DesignMinute, StoreError> {
        self.minutes
            .read()
            .values()
            .find(|m| m.session == Some(session))
            .cloned()
            .ok_or(StoreError::UnknownMinute)
    }
}
