//! The review service proper, independent of the HTTP layer.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::pin::Pin;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use futures::stream::{self, Stream};
use illocute_core::act::{
    self, Annotation, AnnotationDraft, IllocutionaryForce, Reference, Role, Sphere, Status, Utterance,
};
use illocute_core::geometry::{Anchor, Mesh, RemapStatus};
use illocute_core::ids::{AnnotationId, DocumentId, MinuteId, ParticipantId, SessionId};
use illocute_core::minute::{generate_minute, session_minute_id, DesignMinute, MinuteSource};
use illocute_core::session::{Camera, EventBody, ReviewSession, SessionError, SessionEvent, SessionState};
use illocute_core::store::{AnnotationStore, DocumentRef, Query, StoreError};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use crate::auth::{Caller, TokenRegistry};
use crate::error::ServiceError;

/// Body of an annotation created outside a session. The author is the
/// caller; the revision defaults to the latest one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewAnnotation {
    pub document: DocumentId,
    #[serde(default)]
    pub document_revision: Option<u32>,
    pub force: IllocutionaryForce,
    pub utterance: Utterance,
    pub anchor: Anchor,
    pub sphere: Sphere,
    #[serde(default)]
    pub references: Vec<Reference>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenSession {
    pub document: DocumentId,
    #[serde(default)]
    pub revision: Option<u32>,
    pub chair: ParticipantId,
    pub minute_taker: ParticipantId,
}

/// An action taken inside a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SessionAction {
    Create {
        force: IllocutionaryForce,
        utterance: Utterance,
        anchor: Anchor,
        sphere: Sphere,
        #[serde(default)]
        references: Vec<Reference>,
    },
    Reply {
        annotation: AnnotationId,
        text: String,
    },
    Transition {
        annotation: AnnotationId,
        to: Status,
    },
    ShareViewpoint {
        camera: Camera,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: SessionId,
    pub document: DocumentId,
    pub revision: u32,
    pub chair: ParticipantId,
    pub minute_taker: ParticipantId,
    pub state: SessionState,
    pub participants: BTreeMap<ParticipantId, Role>,
    pub present: BTreeSet<ParticipantId>,
    pub last_seq: u64,
    pub opened_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<DateTime<Utc>>,
}

impl From<&ReviewSession> for SessionSummary {
    fn from(s: &ReviewSession) -> Self {
        SessionSummary {
            id: s.id,
            document: s.document,
            revision: s.revision,
            chair: s.chair.clone(),
            minute_taker: s.minute_taker.clone(),
            state: s.state,
            participants: s.participants.clone(),
            present: s.present.clone(),
            last_seq: s.last_seq(),
            opened_at: s.opened_at,
            closed_at: s.closed_at,
        }
    }
}

/// Result of adding a revision, limited to annotations the caller may see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionReport {
    pub revision: u32,
    pub remapped: Vec<RemapEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemapEntry {
    pub annotation: AnnotationId,
    pub status: RemapStatus,
}

pub type EventStream = Pin<Box<dyn Stream<Item = SessionEvent> + Send>>;

struct SessionSlot {
    session: Mutex<ReviewSession>,
    /// Carries the last appended seq; subscribers wait on it.
    appended: watch::Sender<u64>,
}

impl SessionSlot {
    fn announce(&self, seq: u64) {
        self.appended.send_replace(seq);
    }
}

pub struct ReviewService {
    store: AnnotationStore,
    tokens: TokenRegistry,
    sessions: RwLock<HashMap<SessionId, Arc<SessionSlot>>>,
}

impl ReviewService {
    pub fn new(store: AnnotationStore, tokens: TokenRegistry) -> Self {
        ReviewService {
            store,
            tokens,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    pub fn authenticate(&self, token: &str) -> Result<Caller, ServiceError> {
        self.tokens
            .authenticate(token)
            .cloned()
            .ok_or(ServiceError::Unauthorized)
    }

    fn now(&self) -> DateTime<Utc> {
        self.store.clock().now()
    }

    // ------------------------------------------------------------ documents

    pub fn put_document(&self, _caller: &Caller, name: &str, mesh: Mesh) -> Result<DocumentRef, ServiceError> {
        Ok(self.store.put_document(name, mesh)?)
    }

    pub fn add_revision(
        &self,
        caller: &Caller,
        document: DocumentId,
        mesh: Mesh,
    ) -> Result<RevisionReport, ServiceError> {
        let outcome = self.store.add_revision(document, mesh)?;
        let remapped = outcome
            .remapped
            .into_iter()
            .filter(|(id, _)| self.store.get(*id, Some(&caller.participant)).is_ok())
            .map(|(annotation, status)| RemapEntry { annotation, status })
            .collect();
        Ok(RevisionReport {
            revision: outcome.revision,
            remapped,
        })
    }

    /// Live documents only; a retired document is unknown.
    pub fn document(&self, id: DocumentId) -> Result<DocumentRef, ServiceError> {
        match self.store.document(id) {
            Ok(doc) if doc.alive => Ok(doc),
            Ok(_) => Err(StoreError::UnknownDocument(id).into()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn documents(&self) -> Vec<DocumentRef> {
        self.store.documents()
    }

    pub fn mesh(&self, id: DocumentId, revision: Option<u32>) -> Result<(u32, Arc<Mesh>), ServiceError> {
        let doc = self.document(id)?;
        let revision = revision.unwrap_or(doc.latest().revision);
        Ok((revision, self.store.mesh(id, revision)?))
    }

    // ---------------------------------------------------------- annotations

    fn draft(&self, caller: &Caller, n: NewAnnotation) -> Result<AnnotationDraft, ServiceError> {
        let revision = match n.document_revision {
            Some(r) => r,
            None => self.document(n.document)?.latest().revision,
        };
        Ok(AnnotationDraft {
            author: caller.participant.clone(),
            document: n.document,
            document_revision: revision,
            force: n.force,
            utterance: n.utterance,
            anchor: n.anchor,
            sphere: n.sphere,
            references: n.references,
        })
    }

    pub fn create_annotation(&self, caller: &Caller, new: NewAnnotation) -> Result<Annotation, ServiceError> {
        let draft = self.draft(caller, new)?;
        Ok(self.store.create(draft)?)
    }

    pub fn annotation(&self, caller: &Caller, id: AnnotationId) -> Result<Annotation, ServiceError> {
        Ok(self.store.get(id, Some(&caller.participant))?)
    }

    pub fn query(&self, caller: &Caller, q: &Query) -> Result<Vec<Annotation>, ServiceError> {
        Ok(self.store.query(q, Some(&caller.participant))?)
    }

    pub fn reply(&self, caller: &Caller, id: AnnotationId, text: &str) -> Result<Annotation, ServiceError> {
        let who = &caller.participant;
        Ok(self.store.update(id, who, |cur, ctx| {
            // Server time may trail an entry written under another clock.
            let at = cur.thread.last().map_or(ctx.now, |e| e.at.max(ctx.now));
            act::append_reply(cur, who, text, at)
        })?)
    }

    /// Returns the status before and the annotation after the change.
    pub fn transition(
        &self,
        caller: &Caller,
        id: AnnotationId,
        to: Status,
    ) -> Result<(Status, Annotation), ServiceError> {
        let mut from = Status::Draft;
        let after = self.store.update(id, &caller.participant, |cur, ctx| {
            from = cur.status;
            act::transition_status(cur, &caller.participant, caller.role, to, ctx.incoming_answers, ctx.now)
        })?;
        Ok((from, after))
    }

    pub fn publish(&self, caller: &Caller, id: AnnotationId) -> Result<Annotation, ServiceError> {
        Ok(self
            .store
            .update(id, &caller.participant, |cur, ctx| act::publish(cur, ctx.now))?)
    }

    // ------------------------------------------------------------- sessions

    fn slot(&self, id: SessionId) -> Result<Arc<SessionSlot>, ServiceError> {
        self.sessions
            .read()
            .get(&id)
            .cloned()
            .ok_or(ServiceError::UnknownSession(id))
    }

    fn registered_role(
        &self,
        participant: &ParticipantId,
        needed: Role,
    ) -> Result<(ParticipantId, Role), ServiceError> {
        match self.tokens.role_of(participant) {
            Some(role) => Ok((participant.clone(), role)),
            None => Err(SessionError::RoleRequired {
                participant: participant.clone(),
                needed,
            }
            .into()),
        }
    }

    pub fn open_session(&self, _caller: &Caller, req: OpenSession) -> Result<SessionSummary, ServiceError> {
        let doc = self.document(req.document)?;
        let revision = req.revision.unwrap_or(doc.latest().revision);
        if doc.revision(revision).is_none() {
            return Err(StoreError::UnknownRevision {
                document: doc.id,
                revision,
            }
            .into());
        }
        let chair = self.registered_role(&req.chair, Role::Architect)?;
        let minute_taker = self.registered_role(&req.minute_taker, Role::Pms)?;
        let id = SessionId(self.store.ids().next_uuid());
        let session = ReviewSession::open(id, doc.id, revision, chair, minute_taker, self.now())?;
        let summary = SessionSummary::from(&session);
        let slot = Arc::new(SessionSlot {
            session: Mutex::new(session),
            appended: watch::channel(0).0,
        });
        self.sessions.write().insert(id, slot);
        Ok(summary)
    }

    pub fn session(&self, id: SessionId) -> Result<SessionSummary, ServiceError> {
        Ok(SessionSummary::from(&*self.slot(id)?.session.lock()))
    }

    pub fn join(&self, caller: &Caller, id: SessionId) -> Result<SessionSummary, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.session.lock();
        let seq = s
            .join(caller.participant.clone(), caller.role, self.now())?
            .map(|e| e.seq);
        let summary = SessionSummary::from(&*s);
        drop(s);
        if let Some(seq) = seq {
            slot.announce(seq);
        }
        Ok(summary)
    }

    pub fn leave(&self, caller: &Caller, id: SessionId) -> Result<SessionSummary, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.session.lock();
        let seq = s.leave(&caller.participant, self.now())?.seq;
        let summary = SessionSummary::from(&*s);
        drop(s);
        slot.announce(seq);
        Ok(summary)
    }

    /// Applies `action` and appends its event. The session lock is held
    /// across the store operation so log order matches effect order.
    pub fn session_act(
        &self,
        caller: &Caller,
        id: SessionId,
        action: SessionAction,
    ) -> Result<SessionEvent, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.session.lock();
        s.ensure_open()?;
        s.ensure_joined(&caller.participant)?;
        let actor = Caller {
            participant: caller.participant.clone(),
            role: s.participants[&caller.participant],
        };
        let private_to = |a: &Annotation| (a.sphere == Sphere::Private).then(|| a.author.clone());
        let in_session = |target: AnnotationId| -> Result<(), ServiceError> {
            let a = self.store.get(target, Some(&actor.participant))?;
            if a.document != s.document {
                return Err(ServiceError::BadRequest(format!(
                    "annotation {target} does not belong to the session's document"
                )));
            }
            Ok(())
        };
        let (body, restricted) = match action {
            SessionAction::Create {
                force,
                utterance,
                anchor,
                sphere,
                references,
            } => {
                let draft = NewAnnotation {
                    document: s.document,
                    document_revision: Some(s.revision),
                    force,
                    utterance,
                    anchor,
                    sphere,
                    references,
                };
                let a = self.create_annotation(&actor, draft)?;
                let restricted = private_to(&a);
                (
                    EventBody::AnnotationCreated {
                        annotation: Some(Box::new(a)),
                    },
                    restricted,
                )
            }
            SessionAction::Reply { annotation, text } => {
                in_session(annotation)?;
                let a = self.reply(&actor, annotation, &text)?;
                let restricted = private_to(&a);
                let entry = a.thread.last().cloned();
                (
                    EventBody::ReplyAdded {
                        annotation: Some(annotation),
                        entry,
                    },
                    restricted,
                )
            }
            SessionAction::Transition { annotation, to } => {
                in_session(annotation)?;
                let (from, a) = self.transition(&actor, annotation, to)?;
                let restricted = private_to(&a);
                (
                    EventBody::StatusChanged {
                        annotation: Box::new(a),
                        from,
                        to,
                        actor: actor.participant.clone(),
                    },
                    restricted,
                )
            }
            SessionAction::ShareViewpoint { camera } => (
                EventBody::ViewpointShared {
                    participant: actor.participant.clone(),
                    camera,
                },
                None,
            ),
        };
        let event = s.record(body, self.now(), restricted)?.clone();
        drop(s);
        slot.announce(event.seq);
        Ok(event.view_for(&caller.participant))
    }

    /// Closes the session, then compiles and stores its minute.
    pub fn close_session(&self, caller: &Caller, id: SessionId) -> Result<MinuteId, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.session.lock();
        let minute_id = session_minute_id(id);
        let seq = s.close(&caller.participant, minute_id, self.now())?.seq;
        let minute = generate_minute(&self.store, MinuteSource::Session(&s))?;
        self.store.save_minute(&minute)?;
        drop(s);
        slot.announce(seq);
        Ok(minute_id)
    }

    /// Events after `last_seen`, then live ones as they are appended. The
    /// stream ends once a closed session has been fully delivered.
    pub fn subscribe(&self, caller: &Caller, id: SessionId, last_seen: u64) -> Result<EventStream, ServiceError> {
        let slot = self.slot(id)?;
        let rx = {
            let s = slot.session.lock();
            if !s.participants.contains_key(&caller.participant) {
                return Err(SessionError::NotJoined(caller.participant.clone()).into());
            }
            // Subscribing under the lock: anything appended later is announced.
            slot.appended.subscribe()
        };
        let viewer = caller.participant.clone();
        let state = (slot, rx, last_seen, VecDeque::new());
        Ok(Box::pin(stream::unfold(
            state,
            move |(slot, mut rx, mut last, mut buf)| {
                let viewer = viewer.clone();
                async move {
                    loop {
                        if let Some(event) = buf.pop_front() {
                            let event: SessionEvent = event;
                            last = event.seq;
                            return Some((event, (slot, rx, last, buf)));
                        }
                        let closed = {
                            let s = slot.session.lock();
                            buf.extend(s.events_since(last).iter().map(|e| e.view_for(&viewer)));
                            !s.is_open()
                        };
                        if !buf.is_empty() {
                            continue;
                        }
                        if closed || rx.changed().await.is_err() {
                            return None;
                        }
                    }
                }
            },
        )))
    }

    pub fn minute(&self, id: SessionId) -> Result<DesignMinute, ServiceError> {
        match self.store.minute_for_session(id) {
            Ok(m) => Ok(m),
            Err(StoreError::UnknownMinute) => match self.slot(id) {
                Ok(_) => Err(illocute_core::minute::MinuteError::SessionStillOpen.into()),
                Err(e) => Err(e),
            },
            Err(e) => Err(e.into()),
        }
    }
}
