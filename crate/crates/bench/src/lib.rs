//! Shared workloads for the benchmarks.

use std::sync::Arc;

use illocute_core::act::{AnnotationDraft, ClarificationKind, ForceKind, Polarity};
use illocute_core::clock::ManualClock;
use illocute_core::geometry::{Anchor, Vec3};
use illocute_core::ids::SequentialIds;
use illocute_core::{
    fixtures, AnnotationStore, ContentKind, DocumentId, IllocutionaryForce, Mesh, ParticipantId, Query, Sphere,
    StoreOptions, Utterance,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng, half_extent: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(-half_extent..half_extent),
    )
}

pub fn random_anchor(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Anchor {
    let (u, v) = (rng.gen_range(0.0..1.0f64), rng.gen_range(0.0..1.0f64));
    let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
    Anchor::on_face(rng.gen_range(0..mesh.face_count()) as u32, [1.0 - u - v, u, v])
}

pub fn random_force(rng: &mut ChaCha8Rng) -> IllocutionaryForce {
    match rng.gen_range(0..4) {
        0 => IllocutionaryForce::proposition(),
        1 => IllocutionaryForce::clarification(ClarificationKind::Problem),
        2 => IllocutionaryForce::evaluation(Some(Polarity::Negative)),
        _ => IllocutionaryForce::validation(),
    }
}

/// A store with `n` annotations spread over one icosphere document, a tenth
/// of them private to one of `people` participants.
pub fn populated_store(n: usize, people: usize, seed: u64) -> (AnnotationStore, DocumentId) {
    let store = AnnotationStore::in_memory(StoreOptions {
        clock: Arc::new(ManualClock::fixed()),
        ids: Arc::new(SequentialIds::new(seed)),
        ..StoreOptions::default()
    });
    let mesh = fixtures::icosphere(3);
    let mut rng = rng(seed);
    let doc = store.put_document("sphere", mesh.clone()).unwrap();
    for i in 0..n {
        let author = ParticipantId::new(format!("p{}", rng.gen_range(0..people)));
        store
            .create(AnnotationDraft {
                author,
                document: doc.id,
                document_revision: 1,
                force: random_force(&mut rng),
                utterance: Utterance {
                    text: format!("note {i} on tolerance {}", rng.gen_range(0..1000)),
                    content_kind: ContentKind::Other,
                },
                anchor: random_anchor(&mut rng, &mesh),
                sphere: if rng.gen_bool(0.1) {
                    Sphere::Private
                } else {
                    Sphere::Public
                },
                references: vec![],
            })
            .unwrap();
    }
    (store, doc.id)
}

pub fn force_query(kind: ForceKind) -> Query {
    Query {
        force_kind: Some(kind),
        ..Query::default()
    }
}
