mod common;

use std::sync::LazyLock;

use histevents::{bundled_profiles, Event, EventStore, SortOrder};
use proptest::prelude::*;

use common::{gold_store, oracle_query, query_strategy};

#[test]
fn randomized_queries_match_the_oracle() {
    common::check_query_oracle(1000).unwrap();
}

#[test]
fn documented_example_requests() {
    let dir = tempfile::tempdir().unwrap();
    let store = gold_store(dir.path());
    println!("{}", common::example_queries(&store, &bundled_profiles()).unwrap());
}

#[test]
fn descending_is_the_exact_reverse() {
    let dir = tempfile::tempdir().unwrap();
    let store = gold_store(dir.path());
    let mut q = histevents::EventQuery { limit: 10_000, ..Default::default() };
    let asc: Vec<String> = store.query(&q).into_iter().map(|e| e.id).collect();
    q.order = SortOrder::Desc;
    let mut desc: Vec<String> = store.query(&q).into_iter().map(|e| e.id).collect();
    desc.reverse();
    assert_eq!(asc, desc);
    assert_eq!(asc.len(), store.len());
}

#[test]
fn bce_events_sort_first() {
    let dir = tempfile::tempdir().unwrap();
    let store = gold_store(dir.path());
    let all = store.events();
    let years: Vec<i32> = all.iter().map(|e| e.date.year()).collect();
    assert!(years.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(years[0], -300);
    // Year-only events of 44 BC precede its dated ones.
    let bc44: Vec<_> = all.iter().filter(|e| e.date.year() == -44).collect();
    let first_dated = bc44.iter().position(|e| e.date.month().is_some()).unwrap();
    assert!(bc44[..first_dated].iter().all(|e| e.date.month().is_none()));
    assert!(bc44[first_dated..].iter().all(|e| e.date.month().is_some()));
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let before = gold_store(dir.path());
    let events = before.events();
    let path = before.path().to_path_buf();
    drop(before);
    let after = EventStore::open(&path).unwrap();
    assert_eq!(after.events(), events);
    let text = std::fs::read(&path).unwrap();
    drop(after);
    assert_eq!(std::fs::read(&path).unwrap(), text);
}

static EVENTS: LazyLock<Vec<Event>> = LazyLock::new(common::corpus_events);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn query_matches_oracle_on_a_subset(q in query_strategy(), keep in prop::collection::vec(any::<bool>(), 169)) {
        let dir = tempfile::tempdir().unwrap();
        let events: Vec<_> = EVENTS.iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e.clone()).collect();
        let mut store = EventStore::open(dir.path().join("s.jsonl")).unwrap();
        store.upsert_events(&events).unwrap();
        let got: Vec<String> = store.query(&q.to_query()).into_iter().map(|e| e.id).collect();
        prop_assert_eq!(got, oracle_query(&events, &q));
    }
}
