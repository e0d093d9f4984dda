mod common;

use std::collections::BTreeSet;

use common::fixture_path;
use worldgraph_core::engine::{World, WorldFixture};
use worldgraph_core::graph::{
    apply_delta, serialize_delta, EdgeLabel, GraphDelta, Mutation, Triple,
};
use worldgraph_core::use_events::{
    apply_use_event, attribute_edge, instantiate, load_use_events, make_splits, object_key, parse_use_event,
    parse_use_event_json, render_external, ChangeSign, EventKind, LocationSpec, UseEvent,
    UseEventError, UseEventRecord,
};

fn published() -> Vec<UseEvent> {
    load_use_events(&fixture_path("use_events/published.jsonl")).unwrap()
}

fn event(phrase_start: &str) -> UseEvent {
    published()
        .into_iter()
        .find(|e| e.phrase.starts_with(phrase_start))
        .unwrap()
}

fn camp() -> World {
    let json = r#"{"id": "camp", "rooms": [{"name": "camp"}],
        "characters": [{"name": "hunter", "room": "camp"}, {"name": "scout", "room": "camp"}]}"#;
    serde_json::from_str::<WorldFixture>(json).unwrap().build().unwrap()
}

fn run(e: &UseEvent) -> (World, World, GraphDelta) {
    let world = instantiate(&camp(), e, "hunter").unwrap();
    let out = apply_use_event(&world, e, "hunter").unwrap();
    (world, out.world, out.delta)
}

#[test]
fn all_published_events_parse() {
    let events = published();
    assert_eq!(events.len(), 9);
    let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::Success).count(), 6);
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::Boring).count(), 1);
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::Failed).count(), 2);
}

#[test]
fn stake_event_shape() {
    let e = event("tie rope");
    assert_eq!(e.kind, EventKind::Success);
    assert_eq!(e.final_objects.len(), 1);
    let f = &e.final_objects[0];
    assert_eq!(f.name, "sharpened wooden stake");
    assert_eq!(f.location, LocationSpec::WornByActor);
    assert_eq!(f.attribute_changes.len(), 1);
    assert_eq!(f.attribute_changes[0].sign, ChangeSign::Add);
    assert_eq!(f.attribute_changes[0].attribute, "wearable");
}

#[test]
fn stew_event_is_boring_without_final_state() {
    let e = event("Melt the bells");
    assert_eq!(e.kind, EventKind::Boring);
    assert!(e.final_objects.is_empty());
    assert_eq!(e.alternate, None);
}

#[test]
fn instantiate_places_objects() {
    let e = event("tie rope");
    let w = instantiate(&camp(), &e, "hunter").unwrap();
    assert!(w.graph.contains(&Triple::new("hunter", EdgeLabel::IsCarrying, "rope")));
    assert!(w
        .graph
        .contains(&Triple::new("sharpened wooden stake", EdgeLabel::IsInside, "camp")));
    assert_eq!(
        w.graph.value_of("rope", EdgeLabel::HasDescription),
        Some("a small length of tough rope")
    );
    let again = instantiate(&w, &e, "hunter").unwrap();
    assert_eq!(again, w);
}

#[test]
fn instantiate_materializes_required_attributes() {
    let e = event("Burn the tents");
    let w = instantiate(&camp(), &e, "hunter").unwrap();
    assert!(w.graph.contains(&Triple::new("lit torch", EdgeLabel::HasAttribute, "burning")));
    assert!(w.graph.contains(&Triple::new("empty tent", EdgeLabel::HasAttribute, "flammable")));
}

#[test]
fn instantiate_requires_a_located_actor() {
    let e = event("tie rope");
    assert!(matches!(
        instantiate(&camp(), &e, "nobody"),
        Err(UseEventError::UnknownActor(_))
    ));
}

#[test]
fn stake_delta_matches_hand_computation() {
    let e = event("tie rope");
    let (_, after, delta) = run(&e);
    let stake = "sharpened wooden stake";
    let old = "The wood stake has a sharp end, it looks really dangerous. It looks new and its made out of a snakewood tree.";
    let new = "The wood stake has a sharp end. It's new and made out of a snakewood tree. It has a piece of rope tied to each end, forming a sling.";
    let expected = GraphDelta::Mutations(vec![
        Mutation::del(Triple::new("hunter", EdgeLabel::IsCarrying, "rope")),
        Mutation::del(Triple::new(stake, EdgeLabel::HasDescription, old)),
        Mutation::del(Triple::new(stake, EdgeLabel::IsInside, "camp")),
        Mutation::add(Triple::new("hunter", EdgeLabel::IsWearing, stake)),
        Mutation::add(Triple::new("rope", EdgeLabel::HasAttribute, "consumed")),
        Mutation::add(Triple::new(stake, EdgeLabel::HasDescription, new)),
        Mutation::add(Triple::boolean(stake, EdgeLabel::IsWearable, true)),
    ]);
    assert_eq!(delta, expected);
    assert!(after.holds_with("hunter", EdgeLabel::IsWearing, stake));
    assert!(after.graph.is_true(stake, EdgeLabel::IsWearable));
}

#[test]
fn no_op_events_label_no_mutation() {
    for e in published().iter().filter(|e| e.is_no_op()) {
        let (before, after, delta) = run(e);
        assert_eq!(serialize_delta(&delta), "NO_MUTATION", "{}", e.phrase);
        assert_eq!(before.graph.state_triples(), after.graph.state_triples());
    }
}

#[test]
fn bird_is_trapped_in_net() {
    let e = event("catch tropical bird");
    let (_, after, _) = run(&e);
    let g = &after.graph;
    assert!(g.contains(&Triple::new("trapped bird", EdgeLabel::HasAttribute, "trapped")));
    assert!(!g.contains(&Triple::new("trapped bird", EdgeLabel::HasAttribute, "calm")));
    assert!(g.contains(&Triple::new("trapped bird", EdgeLabel::IsInside, "casting net")));
    assert!(g.contains(&Triple::new("casting net", EdgeLabel::IsInside, "camp")));
    assert!(g.contains(&Triple::new("casting net", EdgeLabel::HasAttribute, "tangled")));
    assert_eq!(g.location_of("tropical bird"), None);
}

#[test]
fn chandelier_keeps_its_place_and_drops_a_candle() {
    let e = event("hook the rope");
    let (_, after, _) = run(&e);
    let g = &after.graph;
    assert!(g.contains(&Triple::new("rope", EdgeLabel::IsInside, "chandelier")));
    assert!(g.contains(&Triple::new("chandelier", EdgeLabel::IsInside, "camp")));
    assert!(g.contains(&Triple::new("candle", EdgeLabel::IsInside, "camp")));
    for a in ["looped", "strong", "entangled"] {
        assert!(g.contains(&Triple::new("rope", EdgeLabel::HasAttribute, a)));
    }
    for a in ["incomplete", "unbalanced"] {
        assert!(g.contains(&Triple::new("chandelier", EdgeLabel::HasAttribute, a)));
    }
}

#[test]
fn tent_is_renamed_in_place() {
    let e = event("Burn the tents");
    let (_, after, _) = run(&e);
    let g = &after.graph;
    assert!(g.contains(&Triple::new("flaming tent", EdgeLabel::IsInside, "camp")));
    assert!(g.contains(&Triple::new("flaming tent", EdgeLabel::HasAttribute, "ablaze")));
    assert!(g.contains(&Triple::new("hunter", EdgeLabel::IsCarrying, "lit torch")));
    assert_eq!(g.location_of("empty tent"), None);
}

#[test]
fn unsuccessful_flavor_still_updates() {
    let e = event("wrap the bunny");
    let (_, after, delta) = run(&e);
    assert!(!delta.is_no_mutation());
    assert!(after.graph.contains(&Triple::new("rabbit fur coverlet", EdgeLabel::IsInside, "camp")));
    assert!(after.graph.is_true("rabbit fur coverlet", EdgeLabel::IsWearable));
}

/// Every final object ends with exactly the description, location, and
/// attribute changes its record states.
#[test]
fn final_states_hold_exactly() {
    for e in published().iter().filter(|e| !e.is_no_op()) {
        let (before, after, delta) = run(e);
        let g = &after.graph;
        for f in &e.final_objects {
            let k = object_key(&f.name);
            assert_eq!(g.value_of(&k, EdgeLabel::HasDescription), Some(f.description.as_str()));
            let loc = g.location_of(&k).unwrap_or_else(|| panic!("{k} unplaced"));
            match &f.location {
                LocationSpec::InRoom => assert_eq!(loc, &Triple::new(&k, EdgeLabel::IsInside, "camp")),
                LocationSpec::HeldByActor => {
                    assert_eq!(loc, &Triple::new("hunter", EdgeLabel::IsCarrying, &k))
                }
                LocationSpec::WornByActor => {
                    assert_eq!(loc, &Triple::new("hunter", EdgeLabel::IsWearing, &k))
                }
                LocationSpec::InsideObject(n) | LocationSpec::OnObject(n) => {
                    assert_eq!(loc, &Triple::new(&k, EdgeLabel::IsInside, object_key(n)))
                }
                LocationSpec::OriginalLocationOf(n) => {
                    let orig = before.graph.location_of(&object_key(n)).unwrap();
                    assert_eq!(loc.edge, orig.edge);
                    assert_eq!(loc.container_party(), orig.container_party());
                }
            }
            for c in &f.attribute_changes {
                let present = match attribute_edge(&c.attribute) {
                    Some(edge) => g.is_true(&k, edge),
                    None => g.contains(&Triple::new(&k, EdgeLabel::HasAttribute, &c.attribute)),
                };
                assert_eq!(present, c.sign == ChangeSign::Add, "{k} {c}");
            }
        }
        let replay = apply_delta(&before.graph, &delta).unwrap();
        assert_eq!(replay.state_triples(), g.state_triples(), "{}", e.phrase);
    }
}

#[test]
fn history_records_the_event() {
    let e = event("tie rope");
    let (_, after, _) = run(&e);
    let h = after.graph.history();
    assert!(h.contains(&Triple::new("hunter", EdgeLabel::Observed, &e.narration)));
    assert!(h.contains(&Triple::new("scout", EdgeLabel::Observed, render_external(&e, "hunter"))));
    assert_eq!(h.iter().filter(|t| t.edge == EdgeLabel::HadActed).count(), 1);
}

#[test]
fn external_rendering() {
    let e = event("tie rope");
    assert_eq!(
        render_external(&e, "Milo"),
        "Milo ties a rope to each end of a sharpened wooden stake and slings it across their back."
    );
    let torch = event("Burn the tents");
    let r = render_external(&torch, "Milo");
    assert_eq!(r.matches("Milo").count(), 2);
    assert!(!r.contains("{actor}"));
    // A name containing the placeholder is inserted literally, not re-expanded.
    let odd = render_external(&e, "{actor}{actor}");
    assert_eq!(odd.matches("{actor}").count(), 2);
    assert!(odd.starts_with("{actor}{actor} ties"));
}

#[test]
fn records_round_trip() {
    for e in published() {
        let line = e.to_json_line();
        assert_eq!(parse_use_event_json(&line).unwrap(), e);
    }
}

fn stake_record() -> UseEventRecord {
    let line = std::fs::read_to_string(fixture_path("use_events/published.jsonl")).unwrap();
    serde_json::from_str(line.lines().next().unwrap()).unwrap()
}

#[test]
fn record_errors() {
    let mut r = stake_record();
    r.final_objects[0].location = Some("in the void".into());
    assert!(matches!(parse_use_event(&r), Err(UseEventError::UnresolvableLocation(_))));

    let mut r = stake_record();
    r.phrase = None;
    assert_eq!(parse_use_event(&r), Err(UseEventError::MissingField("phrase".into())));

    let mut r = stake_record();
    r.final_objects[0].attribute_changes = vec!["Wearable".into()];
    assert!(matches!(parse_use_event(&r), Err(UseEventError::BadAttributeSyntax(_))));

    let mut r = stake_record();
    r.external = Some("Someone ties a rope.".into());
    assert_eq!(parse_use_event(&r), Err(UseEventError::MissingPlaceholder));

    let mut r = stake_record();
    r.kind = Some("boring".into());
    assert!(matches!(parse_use_event(&r), Err(UseEventError::UnexpectedFinalState(_))));

    let mut r = stake_record();
    r.final_objects.clear();
    assert_eq!(parse_use_event(&r), Err(UseEventError::EmptySuccess));
}

fn names(events: &[UseEvent]) -> BTreeSet<String> {
    events.iter().flat_map(|e| e.object_keys()).collect()
}

#[test]
fn synthetic_corpus_splits_are_disjoint_and_sized() {
    let corpus = worldgraph_core::synth::synthetic_use_events(2000, 31);
    let s = make_splits(&corpus, 5).unwrap();
    assert!(names(&s.unseen_test).is_disjoint(&names(&s.train)));
    assert!(names(&s.unseen_test).is_disjoint(&names(&s.valid)));
    assert!(names(&s.unseen_test).is_disjoint(&names(&s.test)));
    assert_eq!(s.valid.len(), 100);
    assert_eq!(s.test.len(), 100);
    assert_eq!(s.unseen_test.len(), 100, "{:?}", s.warnings);
    assert_eq!(s.train.len(), 1700);
    assert!(s.warnings.is_empty());
}

#[test]
fn splits_are_byte_identical_under_seed() {
    let corpus = worldgraph_core::synth::synthetic_use_events(2000, 31);
    let a = serde_json::to_string(&make_splits(&corpus, 5).unwrap()).unwrap();
    let b = serde_json::to_string(&make_splits(&corpus, 5).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&make_splits(&corpus, 6).unwrap()).unwrap();
    assert_ne!(a, c);
}
