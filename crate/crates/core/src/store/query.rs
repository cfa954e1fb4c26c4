use serde::{Deserialize, Serialize};

use super::{AnnotationStore, Entry, StoreError};
use crate::act::{Annotation, ClarificationKind, ContentKind, ForceKind, Polarity, Sphere, Status};
use crate::geometry::Vec3;
use crate::ids::{DocumentId, ParticipantId};

/// A ball in model space; requires the query to pin document and revision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec3,
    pub radius: f64,
}

/// Conjunctive filter over annotations. Absent fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Query {
    pub force_kind: Option<ForceKind>,
    pub clarification_kind: Option<ClarificationKind>,
    pub polarity: Option<Polarity>,
    pub content_kind: Option<ContentKind>,
    pub author: Option<ParticipantId>,
    pub status: Option<Status>,
    pub sphere: Option<Sphere>,
    pub document: Option<DocumentId>,
    pub revision: Option<u32>,
    /// Case-insensitive, over the utterance and every thread entry.
    pub text_substring: Option<String>,
    pub region: Option<Region>,
}

impl Query {
    pub fn validate(&self) -> Result<(), StoreError> {
        if let Some(region) = &self.region {
            if self.document.is_none() || self.revision.is_none() {
                return Err(StoreError::InvalidQuery(
                    "a region filter needs both document and revision".into(),
                ));
            }
            if !region.center.is_finite() || region.radius < 0.0 || !region.radius.is_finite() {
                return Err(StoreError::InvalidQuery(
                    "region needs a finite center and radius >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    fn matches_fields(&self, a: &Annotation) -> bool {
        fn ok<T: PartialEq>(filter: &Option<T>, value: T) -> bool {
            filter.as_ref().is_none_or(|f| *f == value)
        }
        fn ok_opt<T: PartialEq + Copy>(filter: &Option<T>, value: Option<T>) -> bool {
            filter.is_none_or(|f| value == Some(f))
        }
        ok(&self.force_kind, a.force.kind)
            && ok_opt(&self.clarification_kind, a.force.clarification_kind)
            && ok_opt(&self.polarity, a.force.polarity)
            && ok(&self.content_kind, a.utterance.content_kind)
            && self.author.as_ref().is_none_or(|p| *p == a.author)
            && ok(&self.status, a.status)
            && ok(&self.sphere, a.sphere)
            && ok(&self.document, a.document)
            && ok(&self.revision, a.document_revision)
    }

    fn matches(&self, entry: &Entry, needle: Option<&str>) -> bool {
        if !self.matches_fields(&entry.annotation) {
            return false;
        }
        if let Some(needle) = needle {
            if !entry.search_text.iter().any(|t| t.contains(needle)) {
                return false;
            }
        }
        if let Some(region) = &self.region {
            if entry.point.distance(region.center) > region.radius {
                return false;
            }
        }
        true
    }
}

impl AnnotationStore {
    /// Annotations matching every filter in `q`, ordered by creation time
    /// then id. Private annotations are included only for their author
    /// (`viewer`); retired documents contribute nothing.
    pub fn query(&self, q: &Query, viewer: Option<&ParticipantId>) -> Result<Vec<Annotation>, StoreError> {
        q.validate()?;
        let needle = q.text_substring.as_ref().map(|s| s.to_lowercase());
        let shards: Vec<_> = {
            let all = self.shards.read();
            match q.document {
                Some(id) => all.get(&id).cloned().into_iter().collect(),
                None => all.values().cloned().collect(),
            }
        };
        let mut out = Vec::new();
        for shard in shards {
            let shard = shard.read();
            if !shard.doc.alive {
                continue;
            }
            out.extend(
                shard
                    .entries
                    .values()
                    .filter(|e| e.annotation.is_visible_to(viewer))
                    .filter(|e| q.matches(e, needle.as_deref()))
                    .map(|e| e.annotation.clone()),
            );
        }
        out.sort_by_key(|a| (a.created_at, a.id));
        Ok(out)
    }
}
