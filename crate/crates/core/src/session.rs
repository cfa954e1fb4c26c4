//! Review sessions: the synchronous evaluation phase.
//!
//! A session owns an append-only, gap-free event log. This module holds the
//! log and the session rules; applying the underlying annotation operations
//! and delivering events is the service's job.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{Annotation, DiscussionEntry, Role, Status};
use crate::geometry::Vec3;
use crate::ids::{AnnotationId, DocumentId, MinuteId, ParticipantId, SessionId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("session is closed")]
    SessionClosed,
    #[error("{0} has not joined the session")]
    NotJoined(ParticipantId),
    #[error("{participant} must hold the {needed:?} role")]
    RoleRequired { participant: ParticipantId, needed: Role },
    #[error("the session already has an architect")]
    SecondArchitect,
}

/// Camera parameters of a shared viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Joined,
    Left,
    AnnotationCreated,
    ReplyAdded,
    StatusChanged,
    ViewpointShared,
    SessionClosed,
}

/// Kind-specific event content. Annotation-bearing payloads are `None` in
/// the redacted form delivered to participants who may not see them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    Joined {
        participant: ParticipantId,
        role: Role,
    },
    Left {
        participant: ParticipantId,
    },
    AnnotationCreated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotation: Option<Box<Annotation>>,
    },
    ReplyAdded {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotation: Option<AnnotationId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entry: Option<DiscussionEntry>,
    },
    StatusChanged {
        annotation: Box<Annotation>,
        from: Status,
        to: Status,
        actor: ParticipantId,
    },
    ViewpointShared {
        participant: ParticipantId,
        camera: Camera,
    },
    SessionClosed {
        actor: ParticipantId,
        minute: MinuteId,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Joined { .. } => EventKind::Joined,
            EventBody::Left { .. } => EventKind::Left,
            EventBody::AnnotationCreated { .. } => EventKind::AnnotationCreated,
            EventBody::ReplyAdded { .. } => EventKind::ReplyAdded,
            EventBody::StatusChanged { .. } => EventKind::StatusChanged,
            EventBody::ViewpointShared { .. } => EventKind::ViewpointShared,
            EventBody::SessionClosed { .. } => EventKind::SessionClosed,
        }
    }

    /// Annotation this event is about, if any.
    pub fn annotation_id(&self) -> Option<AnnotationId> {
        match self {
            EventBody::AnnotationCreated { annotation } => annotation.as_ref().map(|a| a.id),
            EventBody::ReplyAdded { annotation, .. } => *annotation,
            EventBody::StatusChanged { annotation, .. } => Some(annotation.id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
    /// When set, only this participant receives the full payload.
    #[serde(skip)]
    pub restricted_to: Option<ParticipantId>,
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    /// The event as `viewer` may see it. Sequence number, time and kind are
    /// always kept so every subscriber observes the same gap-free order.
    pub fn view_for(&self, viewer: &ParticipantId) -> SessionEvent {
        match &self.restricted_to {
            Some(owner) if owner != viewer => {
                let body = match &self.body {
                    EventBody::AnnotationCreated { .. } => EventBody::AnnotationCreated { annotation: None },
                    EventBody::ReplyAdded { .. } => EventBody::ReplyAdded {
                        annotation: None,
                        entry: None,
                    },
                    other => other.clone(),
                };
                SessionEvent {
                    seq: self.seq,
                    at: self.at,
                    body,
                    restricted_to: None,
                }
            }
            _ => SessionEvent {
                restricted_to: None,
                ..self.clone()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub id: SessionId,
    pub document: DocumentId,
    pub revision: u32,
    pub chair: ParticipantId,
    pub minute_taker: ParticipantId,
    /// Everyone who has joined, with the role they joined under.
    pub participants: BTreeMap<ParticipantId, Role>,
    /// Participants currently present.
    pub present: BTreeSet<ParticipantId>,
    pub state: SessionState,
    pub event_log: Vec<SessionEvent>,
    pub opened_at: DateTime<Utc>,
    pub closed_at: Option<DateTime<Utc>>,
}

impl ReviewSession {
    pub fn open(
        id: SessionId,
        document: DocumentId,
        revision: u32,
        chair: (ParticipantId, Role),
        minute_taker: (ParticipantId, Role),
        at: DateTime<Utc>,
    ) -> Result<Self, SessionError> {
        if chair.1 != Role::Architect {
            return Err(SessionError::RoleRequired {
                participant: chair.0,
                needed: Role::Architect,
            });
        }
        if minute_taker.1 != Role::Pms {
            return Err(SessionError::RoleRequired {
                participant: minute_taker.0,
                needed: Role::Pms,
            });
        }
        Ok(ReviewSession {
            id,
            document,
            revision,
            chair: chair.0,
            minute_taker: minute_taker.0,
            participants: BTreeMap::new(),
            present: BTreeSet::new(),
            state: SessionState::Open,
            event_log: Vec::new(),
            opened_at: at,
            closed_at: None,
        })
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }

    pub fn last_seq(&self) -> u64 {
        self.event_log.len() as u64
    }

    pub fn ensure_open(&self) -> Result<(), SessionError> {
        if self.is_open() {
            Ok(())
        } else {
            Err(SessionError::SessionClosed)
        }
    }

    pub fn ensure_joined(&self, participant: &ParticipantId) -> Result<(), SessionError> {
        if self.present.contains(participant) {
            Ok(())
        } else {
            Err(SessionError::NotJoined(participant.clone()))
        }
    }

    fn push(&mut self, body: EventBody, at: DateTime<Utc>, restricted_to: Option<ParticipantId>) -> &SessionEvent {
        let seq = self.last_seq() + 1;
        self.event_log.push(SessionEvent {
            seq,
            at,
            body,
            restricted_to,
        });
        self.event_log.last().expect("just pushed")
    }

    /// Appends an event to an open session. Callers check membership first.
    pub fn record(
        &mut self,
        body: EventBody,
        at: DateTime<Utc>,
        restricted_to: Option<ParticipantId>,
    ) -> Result<&SessionEvent, SessionError> {
        self.ensure_open()?;
        Ok(self.push(body, at, restricted_to))
    }

    /// Joining twice is a no-op returning `None`.
    pub fn join(
        &mut self,
        participant: ParticipantId,
        role: Role,
        at: DateTime<Utc>,
    ) -> Result<Option<&SessionEvent>, SessionError> {
        self.ensure_open()?;
        if self.present.contains(&participant) {
            return Ok(None);
        }
        if role == Role::Architect && participant != self.chair {
            return Err(SessionError::SecondArchitect);
        }
        self.participants.insert(participant.clone(), role);
        self.present.insert(participant.clone());
        Ok(Some(self.push(EventBody::Joined { participant, role }, at, None)))
    }

    pub fn leave(&mut self, participant: &ParticipantId, at: DateTime<Utc>) -> Result<&SessionEvent, SessionError> {
        self.ensure_open()?;
        self.ensure_joined(participant)?;
        self.present.remove(participant);
        Ok(self.push(
            EventBody::Left {
                participant: participant.clone(),
            },
            at,
            None,
        ))
    }

    /// Checks that `actor` may close the session.
    pub fn check_close(&self, actor: &ParticipantId) -> Result<(), SessionError> {
        self.ensure_open()?;
        if *actor != self.chair && *actor != self.minute_taker {
            return Err(SessionError::RoleRequired {
                participant: actor.clone(),
                needed: Role::Pms,
            });
        }
        Ok(())
    }

    pub fn close(
        &mut self,
        actor: &ParticipantId,
        minute: MinuteId,
        at: DateTime<Utc>,
    ) -> Result<&SessionEvent, SessionError> {
        self.check_close(actor)?;
        self.push(
            EventBody::SessionClosed {
                actor: actor.clone(),
                minute,
            },
            at,
            None,
        );
        self.state = SessionState::Closed;
        self.closed_at = Some(at);
        self.present.clear();
        Ok(self.event_log.last().expect("just pushed"))
    }

    /// Events with `seq > last_seen`, in order.
    pub fn events_since(&self, last_seen: u64) -> &[SessionEvent] {
        let start = (last_seen as usize).min(self.event_log.len());
        &self.event_log[start..]
    }

    /// Annotation ids referenced by the log, in order of first reference.
    pub fn referenced_annotations(&self) -> Vec<(AnnotationId, u64)> {
        let mut seen = BTreeSet::new();
        self.event_log
            .iter()
            .filter_map(|e| e.body.annotation_id().map(|id| (id, e.seq)))
            .filter(|(id, _)| seen.insert(*id))
            .collect()
    }

    /// Camera of the last viewpoint shared strictly before `seq`.
    pub fn viewpoint_before(&self, seq: u64) -> Option<Camera> {
        self.event_log
            .iter()
            .take_while(|e| e.seq < seq)
            .filter_map(|e| match &e.body {
                EventBody::ViewpointShared { camera, .. } => Some(*camera),
                _ => None,
            })
            .last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::derived_uuid;
    use chrono::Duration;

    fn t(s: i64) -> DateTime<Utc> {
        DateTime::<Utc>::UNIX_EPOCH + Duration::seconds(s)
    }

    fn session() -> ReviewSession {
        ReviewSession::open(
            SessionId(derived_uuid("s", b"1")),
            DocumentId(derived_uuid("d", b"1")),
            1,
            ("archi".into(), Role::Architect),
            ("pms".into(), Role::Pms),
            t(0),
        )
        .unwrap()
    }

    fn camera() -> Camera {
        Camera {
            position: Vec3::new(0.0, 0.0, 3.0),
            target: Vec3::ZERO,
            up: Vec3::Y,
        }
    }

    #[test]
    fn opens_with_an_empty_log() {
        let s = session();
        assert!(s.event_log.is_empty());
        assert!(s.is_open());
    }

    #[test]
    fn chair_must_be_an_architect() {
        let err = ReviewSession::open(
            SessionId(derived_uuid("s", b"1")),
            DocumentId(derived_uuid("d", b"1")),
            1,
            ("des".into(), Role::Designer),
            ("pms".into(), Role::Pms),
            t(0),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SessionError::RoleRequired {
                needed: Role::Architect,
                ..
            }
        ));
    }

    #[test]
    fn sequence_numbers_are_contiguous_from_one() {
        let mut s = session();
        s.join("archi".into(), Role::Architect, t(1)).unwrap();
        s.join("des".into(), Role::Designer, t(2)).unwrap();
        assert!(s.join("des".into(), Role::Designer, t(2)).unwrap().is_none());
        s.record(
            EventBody::ViewpointShared {
                participant: "des".into(),
                camera: camera(),
            },
            t(3),
            None,
        )
        .unwrap();
        s.leave(&"des".into(), t(4)).unwrap();
        let seqs: Vec<u64> = s.event_log.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, [1, 2, 3, 4]);
        assert_eq!(s.events_since(2).len(), 2);
        assert_eq!(s.events_since(99).len(), 0);
    }

    #[test]
    fn only_one_architect() {
        let mut s = session();
        assert_eq!(
            s.join("other".into(), Role::Architect, t(1)).unwrap_err(),
            SessionError::SecondArchitect
        );
    }

    #[test]
    fn closing_rules() {
        let mut s = session();
        let minute = MinuteId(derived_uuid("m", b""));
        assert!(matches!(
            s.close(&"ind".into(), minute, t(1)),
            Err(SessionError::RoleRequired { .. })
        ));
        s.close(&"pms".into(), minute, t(1)).unwrap();
        assert_eq!(
            s.close(&"pms".into(), minute, t(2)).unwrap_err(),
            SessionError::SessionClosed
        );
        assert_eq!(
            s.join("x".into(), Role::Designer, t(3)).unwrap_err(),
            SessionError::SessionClosed
        );
        assert_eq!(s.event_log.last().unwrap().kind(), EventKind::SessionClosed);
        assert_eq!(s.closed_at, Some(t(1)));
    }

    #[test]
    fn wire_shape_has_seq_at_kind_payload() {
        let mut s = session();
        s.join("des".into(), Role::Designer, t(1)).unwrap();
        let v = serde_json::to_value(&s.event_log[0]).unwrap();
        assert_eq!(v["seq"], 1);
        assert_eq!(v["kind"], "Joined");
        assert_eq!(v["payload"]["participant"], "des");
        assert_eq!(v["payload"]["role"], "Designer");
        let back: SessionEvent = serde_json::from_value(v).unwrap();
        assert_eq!(back, s.event_log[0]);
    }

    #[test]
    fn viewpoint_lookup_is_strictly_before() {
        let mut s = session();
        s.join("des".into(), Role::Designer, t(1)).unwrap();
        assert_eq!(s.viewpoint_before(2), None);
        s.record(
            EventBody::ViewpointShared {
                participant: "des".into(),
                camera: camera(),
            },
            t(2),
            None,
        )
        .unwrap();
        assert_eq!(s.viewpoint_before(2), None);
        assert_eq!(s.viewpoint_before(3), Some(camera()));
    }
}
