mod support;

use std::sync::Arc;
use std::thread;

use illocute_core::act::append_reply;
use illocute_core::ids::ParticipantId;
use illocute_core::store::Query;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn retiring_a_document_leaves_nothing_behind() {
    let people = participants(4);
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let store = test_store(trial);
        let n = rng.gen_range(0..40);
        let docs = populate(&store, &mut rng, n, &people);
        let victim = *docs.choose(&mut rng).unwrap();
        let before = store.all_annotations().iter().filter(|a| a.document == victim).count();
        assert_eq!(store.retire_document(victim).unwrap(), before);
        assert!(
            store.all_annotations().iter().all(|a| a.document != victim),
            "trial {trial}"
        );
        let q = Query {
            document: Some(victim),
            ..Query::default()
        };
        for viewer in people.iter().map(Some).chain([None]) {
            assert!(store.query(&q, viewer).unwrap().is_empty());
        }
        assert_eq!(store.all_annotations().len(), n - before);
    }
}

#[test]
fn queries_equal_a_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let people = participants(10);
    let store = test_store(31);
    let docs = populate(&store, &mut rng, 2000, &people);
    let oracle = QueryOracle::new(&store);
    let mut nonempty = 0;
    for i in 0..300 {
        let q = random_query(&mut rng, &store, &docs, &people);
        let viewer = if rng.gen_bool(0.2) {
            None
        } else {
            Some(people.choose(&mut rng).unwrap().clone())
        };
        let got = store.query(&q, viewer.as_ref()).unwrap();
        let want = oracle.query(&q, viewer.as_ref());
        assert_eq!(got, want, "query #{i}: {q:?}");
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 100, "only {nonempty} queries matched anything");
}

#[test]
fn export_import_export_is_byte_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let people = participants(5);
    let store = test_store(41);
    let docs = populate(&store, &mut rng, 500, &people);
    for doc in docs {
        let first = store.export_set(doc).unwrap();
        let mesh = store.mesh(doc, 1).unwrap();
        let other = test_store(42);
        let report = other.import_set(&first, Some(&mesh)).unwrap();
        assert!(report.skipped.is_empty(), "{:?}", report.skipped);
        let second = other.export_set(doc).unwrap();
        assert_eq!(String::from_utf8(second).unwrap(), String::from_utf8(first).unwrap());
    }
}

#[test]
fn concurrent_replies_all_land_once_in_writer_order() {
    let people = participants(1);
    let store = Arc::new(test_store(51));
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    populate(&store, &mut rng, 0, &people);
    let doc = store.documents()[0].id;
    let (force, utterance) = illocute_core::fixtures::exhaust_act();
    let target = store
        .create(illocute_core::act::AnnotationDraft {
            author: "pms".into(),
            document: doc,
            document_revision: 1,
            force,
            utterance,
            anchor: illocute_core::fixtures::exhaust_anchor(),
            sphere: illocute_core::act::Sphere::Public,
            references: vec![],
        })
        .unwrap();
    let handles: Vec<_> = (0..8)
        .map(|w| {
            let store = Arc::clone(&store);
            thread::spawn(move || {
                let who = ParticipantId::new(format!("w{w}"));
                for k in 0..100 {
                    let text = format!("w{w}-{k}");
                    store
                        .update(target.id, &who, |cur, ctx| append_reply(cur, &who, &text, ctx.now))
                        .unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let thread = store.get(target.id, None).unwrap().thread;
    assert_eq!(thread.len(), 800);
    for w in 0..8 {
        let mine: Vec<_> = thread
            .iter()
            .filter(|e| e.author.as_str() == format!("w{w}"))
            .map(|e| &e.text)
            .collect();
        let want: Vec<_> = (0..100).map(|k| format!("w{w}-{k}")).collect();
        assert_eq!(mine.len(), 100);
        assert!(mine.iter().zip(&want).all(|(a, b)| *a == b));
    }
    assert!(thread.windows(2).all(|p| p[0].at <= p[1].at));
}
