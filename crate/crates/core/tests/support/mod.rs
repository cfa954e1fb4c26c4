//! Brute-force oracles and random workload generators shared by the
//! integration tests. Nothing here calls into the code under test except
//! to read inputs.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use illocute_core::act::{
    self, AnnotationDraft, ClarificationKind, ContentKind, ForceKind, IllocutionaryForce, Polarity, RefKind, Reference,
    Role, Sphere, Status, Utterance,
};
use illocute_core::clock::ManualClock;
use illocute_core::fixtures;
use illocute_core::geometry::{anchor_to_point, Anchor, Mesh, Vec3};
use illocute_core::ids::{DocumentId, ParticipantId, SequentialIds};
use illocute_core::store::{AnnotationStore, Query, Region, StoreOptions};
use illocute_core::Annotation;
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- geometry

/// Edge band inside which face identity is not compared.
pub const EDGE_BAND: f64 = 1e-6;

fn tri(mesh: &Mesh, f: usize) -> [Vec3; 3] {
    let [a, b, c] = mesh.faces()[f];
    let v = mesh.vertices();
    [v[a as usize], v[b as usize], v[c as usize]]
}

/// Barycentrics of `p` (assumed in the plane of the triangle) from signed
/// sub-triangle areas.
fn area_bary(t: [Vec3; 3], p: Vec3) -> [f64; 3] {
    let n = (t[1] - t[0]).cross(t[2] - t[0]);
    let nn = n.dot(n);
    let u = n.dot((t[2] - t[1]).cross(p - t[1])) / nn;
    let v = n.dot((t[0] - t[2]).cross(p - t[2])) / nn;
    let w = n.dot((t[1] - t[0]).cross(p - t[0])) / nn;
    [u, v, w]
}

fn min3(b: [f64; 3]) -> f64 {
    b[0].min(b[1]).min(b[2])
}

#[derive(Debug, Clone, Copy)]
pub struct OracleHit {
    pub face: usize,
    pub t: f64,
    pub bary: [f64; 3],
    /// True when the hit lies inside the edge band or another face is
    /// hit at nearly the same distance, so face identity is not decisive.
    pub ambiguous: bool,
}

/// Plane-intersection ray cast over every face.
pub enum OracleRay {
    Hit(OracleHit),
    Miss { near_edge: bool },
}

pub fn oracle_ray(mesh: &Mesh, origin: Vec3, dir: Vec3) -> OracleRay {
    let mut cands: Vec<(f64, usize, [f64; 3])> = Vec::new();
    for f in 0..mesh.faces().len() {
        let t = tri(mesh, f);
        let n = (t[1] - t[0]).cross(t[2] - t[0]);
        let denom = n.dot(dir);
        if denom.abs() < 1e-15 {
            continue;
        }
        let s = n.dot(t[0] - origin) / denom;
        if s <= 0.0 {
            continue;
        }
        let p = origin + dir * s;
        let b = area_bary(t, p);
        if min3(b) >= -EDGE_BAND {
            cands.push((s, f, b));
        }
    }
    let strict: Vec<_> = cands.iter().filter(|c| min3(c.2) >= 0.0).copied().collect();
    let best = strict
        .iter()
        .copied()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    match best {
        None => OracleRay::Miss {
            near_edge: !cands.is_empty(),
        },
        Some((t, face, bary)) => {
            let crowded = cands
                .iter()
                .any(|c| c.1 != face && (c.0 - t).abs() <= EDGE_BAND * t.max(1.0));
            let loose_closer = cands.iter().any(|c| c.0 < t && min3(c.2) < 0.0);
            OracleRay::Hit(OracleHit {
                face,
                t,
                bary,
                ambiguous: min3(bary) < EDGE_BAND || crowded || loose_closer,
            })
        }
    }
}

fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = b - a;
    let s = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    a + ab * s
}

/// Distance and closest point from `p` to triangle `f`: plane projection
/// when it falls inside, otherwise the best of the three edges.
fn point_triangle(mesh: &Mesh, f: usize, p: Vec3) -> (f64, Vec3, bool) {
    let t = tri(mesh, f);
    let n = (t[1] - t[0]).cross(t[2] - t[0]);
    let q = p - n * ((p - t[0]).dot(n) / n.dot(n));
    let b = area_bary(t, q);
    if min3(b) >= 0.0 {
        return (p.distance(q), q, min3(b) < EDGE_BAND);
    }
    [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
        .iter()
        .map(|&(a, b)| {
            let c = closest_on_segment(p, a, b);
            (p.distance(c), c, true)
        })
        .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap())
        .unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct OracleNearest {
    pub face: usize,
    pub distance: f64,
    pub point: Vec3,
    pub ambiguous: bool,
}

pub fn oracle_nearest(mesh: &Mesh, p: Vec3) -> OracleNearest {
    let all: Vec<_> = (0..mesh.faces().len())
        .map(|f| (f, point_triangle(mesh, f, p)))
        .collect();
    let (face, (distance, point, on_edge)) = all
        .iter()
        .copied()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap().then(a.0.cmp(&b.0)))
        .unwrap();
    let crowded = all
        .iter()
        .any(|(f, d)| *f != face && (d.0 - distance).abs() <= EDGE_BAND);
    OracleNearest {
        face,
        distance,
        point,
        ambiguous: on_edge || crowded,
    }
}

pub fn random_point_in(rng: &mut impl Rng, lo: Vec3, hi: Vec3) -> Vec3 {
    Vec3::new(
        rng.gen_range(lo.x..=hi.x),
        rng.gen_range(lo.y..=hi.y),
        rng.gen_range(lo.z..=hi.z),
    )
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = random_point_in(rng, Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            return v * (1.0 / l);
        }
    }
}

/// Barycentrics uniformly over the triangle, every coordinate at least
/// `EDGE_BAND` away from zero.
pub fn random_interior_bary(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let b = [1.0 - u - v, u, v];
        if min3(b) >= EDGE_BAND {
            return b;
        }
    }
}

pub fn random_anchor(rng: &mut impl Rng, mesh: &Mesh) -> Anchor {
    let face = rng.gen_range(0..mesh.faces().len()) as u32;
    Anchor::on_face(face, random_interior_bary(rng))
}

// -------------------------------------------------------------- act rules

/// Rule table for acts, evaluated independently of the validator.
pub fn oracle_act_codes(
    force: &IllocutionaryForce,
    text: &str,
    refs: &[(ForceKind, RefKind)],
) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    let is_clar = force.kind == ForceKind::Clarification;
    match (is_clar, force.clarification_kind.is_some()) {
        (true, false) => {
            out.insert("CLARIFICATION_KIND_REQUIRED");
        }
        (false, true) => {
            out.insert("CLARIFICATION_KIND_FORBIDDEN");
        }
        _ => {}
    }
    if force.polarity.is_some() && force.kind != ForceKind::Evaluation {
        out.insert("POLARITY_FORBIDDEN");
    }
    if text.chars().all(char::is_whitespace) {
        out.insert("EMPTY_UTTERANCE");
    }
    for (target, kind) in refs {
        match kind {
            RefKind::Answers if force.kind != ForceKind::Proposition => {
                out.insert("ANSWERS_REQUIRES_PROPOSITION");
            }
            RefKind::Validates => {
                if force.kind != ForceKind::Validation {
                    out.insert("VALIDATES_REQUIRES_VALIDATION");
                }
                if *target != ForceKind::Proposition {
                    out.insert("VALIDATES_TARGET_NOT_PROPOSITION");
                }
            }
            _ => {}
        }
    }
    out
}

pub const WORDS: &[&str] = &[
    "exhaust",
    "tubes",
    "interference",
    "suspension",
    "tolerance",
    "bracket",
    "clearance",
    "weld",
    "hinge",
    "panel",
    "mirror",
    "flange",
    "Gasket",
    "BOLT",
    "seat",
    "duct",
];

fn random_text(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=5);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn valid_force(rng: &mut impl Rng) -> IllocutionaryForce {
    match rng.gen_range(0..4) {
        0 => IllocutionaryForce::proposition(),
        1 => IllocutionaryForce::clarification(
            *[ClarificationKind::Solution, ClarificationKind::Problem]
                .choose(rng)
                .unwrap(),
        ),
        2 => IllocutionaryForce::evaluation(
            *[
                None,
                Some(Polarity::Positive),
                Some(Polarity::Negative),
                Some(Polarity::Neutral),
            ]
            .choose(rng)
            .unwrap(),
        ),
        _ => IllocutionaryForce::validation(),
    }
}

/// A candidate that is valid with probability about one half; invalid
/// ones carry one to three mutations.
pub fn act_candidate(rng: &mut impl Rng) -> (IllocutionaryForce, Utterance, Vec<(ForceKind, RefKind)>) {
    let mut force = valid_force(rng);
    let mut text = random_text(rng);
    let mut refs: Vec<(ForceKind, RefKind)> = Vec::new();
    if rng.gen_bool(0.5) {
        match force.kind {
            ForceKind::Proposition => refs.push((*ForceKind::ALL.choose(rng).unwrap(), RefKind::Answers)),
            ForceKind::Validation => refs.push((ForceKind::Proposition, RefKind::Validates)),
            _ => {}
        }
    }
    if rng.gen_bool(0.3) {
        refs.push((*ForceKind::ALL.choose(rng).unwrap(), RefKind::Clarifies));
    }
    if rng.gen_bool(0.5) {
        for _ in 0..rng.gen_range(1..=3) {
            match rng.gen_range(0..7) {
                0 => force.kind = *ForceKind::ALL.choose(rng).unwrap(),
                1 => force.clarification_kind = Some(ClarificationKind::Problem),
                2 => force.clarification_kind = None,
                3 => force.polarity = Some(Polarity::Neutral),
                4 => text = [" ", "", "\t\n", "\u{3000}"].choose(rng).unwrap().to_string(),
                5 => refs.push((*ForceKind::ALL.choose(rng).unwrap(), RefKind::Answers)),
                _ => refs.push((*ForceKind::ALL.choose(rng).unwrap(), RefKind::Validates)),
            }
        }
    }
    let content = *[
        ContentKind::Constraint,
        ContentKind::Action,
        ContentKind::Decision,
        ContentKind::Other,
    ]
    .choose(rng)
    .unwrap();
    (force, Utterance::new(text, content), refs)
}

// ------------------------------------------------------------ workloads

pub fn test_store(seed: u64) -> AnnotationStore {
    AnnotationStore::in_memory(StoreOptions {
        clock: Arc::new(ManualClock::fixed()),
        ids: Arc::new(SequentialIds::new(seed)),
        ..StoreOptions::default()
    })
}

pub fn participants(n: usize) -> Vec<ParticipantId> {
    (0..n).map(|i| ParticipantId::new(format!("p{i}"))).collect()
}

/// Creates documents and `n` annotations with mixed forces, spheres,
/// statuses and threads. Returns the document ids.
pub fn populate(store: &AnnotationStore, rng: &mut impl Rng, n: usize, people: &[ParticipantId]) -> Vec<DocumentId> {
    let meshes = [
        fixtures::unit_cube(),
        fixtures::icosphere(2),
        fixtures::translated(&fixtures::unit_cube(), Vec3::new(2.0, 0.0, 0.0)),
    ];
    let docs: Vec<DocumentId> = meshes
        .iter()
        .enumerate()
        .map(|(i, m)| store.put_document(&format!("doc{i}"), m.clone()).unwrap().id)
        .collect();
    let mut public: Vec<(DocumentId, Annotation)> = Vec::new();
    for _ in 0..n {
        let d = rng.gen_range(0..docs.len());
        let author = people.choose(rng).unwrap().clone();
        let force = valid_force(rng);
        let mut references = Vec::new();
        if force.kind == ForceKind::Proposition && rng.gen_bool(0.3) {
            if let Some((_, target)) = public.iter().rfind(|(doc, _)| *doc == docs[d]) {
                references.push(Reference {
                    target: target.id,
                    kind: RefKind::Answers,
                });
            }
        }
        let draft = AnnotationDraft {
            author: author.clone(),
            document: docs[d],
            document_revision: 1,
            force,
            utterance: Utterance::new(random_text(rng), ContentKind::Other),
            anchor: random_anchor(rng, &meshes[d]),
            sphere: if rng.gen_bool(0.3) {
                Sphere::Private
            } else {
                Sphere::Public
            },
            references,
        };
        let mut a = store.create(draft).unwrap();
        if rng.gen_bool(0.2) {
            let who = if a.sphere == Sphere::Private {
                author.clone()
            } else {
                people.choose(rng).unwrap().clone()
            };
            let text = random_text(rng);
            a = store
                .update(a.id, &who, |cur, ctx| act::append_reply(cur, &who, &text, ctx.now))
                .unwrap();
        }
        if a.sphere == Sphere::Public && rng.gen_bool(0.2) {
            let to = *[Status::Validated, Status::Rejected].choose(rng).unwrap();
            a = store
                .update(a.id, &author, |cur, ctx| {
                    act::transition_status(cur, &author, Role::Architect, to, ctx.incoming_answers, ctx.now)
                })
                .unwrap();
        }
        if a.sphere == Sphere::Public {
            public.push((docs[d], a));
        }
    }
    docs
}

pub fn random_query(
    rng: &mut impl Rng,
    store: &AnnotationStore,
    docs: &[DocumentId],
    people: &[ParticipantId],
) -> Query {
    let mut q = Query::default();
    let p = 0.25;
    if rng.gen_bool(p) {
        q.force_kind = Some(*ForceKind::ALL.choose(rng).unwrap());
    }
    if rng.gen_bool(0.1) {
        q.clarification_kind = Some(
            *[ClarificationKind::Solution, ClarificationKind::Problem]
                .choose(rng)
                .unwrap(),
        );
    }
    if rng.gen_bool(0.1) {
        q.polarity = Some(
            *[Polarity::Positive, Polarity::Negative, Polarity::Neutral]
                .choose(rng)
                .unwrap(),
        );
    }
    if rng.gen_bool(0.05) {
        q.content_kind = Some(*[ContentKind::Other, ContentKind::Action].choose(rng).unwrap());
    }
    if rng.gen_bool(p) {
        q.author = Some(people.choose(rng).unwrap().clone());
    }
    if rng.gen_bool(p) {
        q.status = Some(*Status::ALL.choose(rng).unwrap());
    }
    if rng.gen_bool(p) {
        q.sphere = Some(*[Sphere::Public, Sphere::Private].choose(rng).unwrap());
    }
    if rng.gen_bool(p) {
        let w = WORDS.choose(rng).unwrap();
        let w = if rng.gen_bool(0.5) {
            w.to_uppercase()
        } else {
            w.to_lowercase()
        };
        let len = rng.gen_range(2..=w.len());
        q.text_substring = Some(w[..len].to_string());
    }
    if rng.gen_bool(0.4) {
        let d = *docs.choose(rng).unwrap();
        q.document = Some(d);
        if rng.gen_bool(0.5) {
            q.revision = Some(1);
            if rng.gen_bool(0.6) {
                let mesh = store.mesh(d, 1).unwrap();
                let (lo, hi) = mesh.bounding_box();
                q.region = Some(Region {
                    center: random_point_in(rng, lo, hi),
                    radius: rng.gen_range(0.0..0.8),
                });
            }
        }
    }
    q
}

/// Snapshot of a store for linear-scan query evaluation.
pub struct QueryOracle {
    rows: Vec<(Annotation, Vec3, Vec<String>)>,
}

impl QueryOracle {
    pub fn new(store: &AnnotationStore) -> Self {
        let live: BTreeSet<DocumentId> = store.documents().into_iter().map(|d| d.id).collect();
        let rows = store
            .all_annotations()
            .into_iter()
            .filter(|a| live.contains(&a.document))
            .map(|a| {
                let mesh = store.mesh(a.document, a.document_revision).unwrap();
                let point = anchor_to_point(&mesh, &a.anchor).unwrap();
                let texts = std::iter::once(&a.utterance.text)
                    .chain(a.thread.iter().map(|e| &e.text))
                    .map(|t| t.to_lowercase())
                    .collect();
                (a, point, texts)
            })
            .collect();
        QueryOracle { rows }
    }

    pub fn query(&self, q: &Query, viewer: Option<&ParticipantId>) -> Vec<Annotation> {
        let needle = q.text_substring.as_ref().map(|s| s.to_lowercase());
        let mut out: Vec<Annotation> = self
            .rows
            .iter()
            .filter(|(a, _, _)| a.sphere == Sphere::Public || Some(&a.author) == viewer)
            .filter(|(a, _, _)| q.force_kind.is_none_or(|k| a.force.kind == k))
            .filter(|(a, _, _)| {
                q.clarification_kind
                    .is_none_or(|k| a.force.clarification_kind == Some(k))
            })
            .filter(|(a, _, _)| q.polarity.is_none_or(|k| a.force.polarity == Some(k)))
            .filter(|(a, _, _)| q.content_kind.is_none_or(|k| a.utterance.content_kind == k))
            .filter(|(a, _, _)| q.author.as_ref().is_none_or(|p| &a.author == p))
            .filter(|(a, _, _)| q.status.is_none_or(|s| a.status == s))
            .filter(|(a, _, _)| q.sphere.is_none_or(|s| a.sphere == s))
            .filter(|(a, _, _)| q.document.is_none_or(|d| a.document == d))
            .filter(|(a, _, _)| q.revision.is_none_or(|r| a.document_revision == r))
            .filter(|(_, _, texts)| {
                needle
                    .as_ref()
                    .is_none_or(|n| texts.iter().any(|t| t.contains(n.as_str())))
            })
            .filter(|(_, p, _)| q.region.is_none_or(|r| p.distance(r.center) <= r.radius))
            .map(|(a, _, _)| a.clone())
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.0.cmp(&b.id.0)));
        out
    }
}

/// Linear-scan evaluation of `q` over every stored annotation.
pub fn oracle_query(store: &AnnotationStore, q: &Query, viewer: Option<&ParticipantId>) -> Vec<Annotation> {
    QueryOracle::new(store).query(q, viewer)
}
