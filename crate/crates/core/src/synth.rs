//! Seeded generators for property tests and benchmarks: random world graphs,
//! graph pairs, deltas, and clustered UseEvent corpora.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeLabel, GraphDelta, Mutation, NodeKind, Triple, WorldGraph};
use crate::use_events::{
    AttributeChange, ChangeSign, EventKind, FinalObjectState, LocationSpec, ObjectSpec, UseEvent,
};

const ADJECTIVES: &[&str] = &[
    "old", "red", "tiny", "carved", "rusty", "silver", "broken", "dusty", "golden", "wet",
];
const NOUNS: &[&str] = &[
    "cup", "lamp", "rope", "key", "book", "blade", "bowl", "crate", "flute", "ring", "coin", "mask",
];
const ROOMS: &[&str] = &["hall", "cellar", "tower top", "kitchen", "crypt", "garden"];
const CHARACTERS: &[&str] = &["guard", "old witch", "miller", "bard", "squire", "ferryman"];
const ATTRIBUTES: &[&str] = &["shiny", "lit", "sharp", "cold", "cracked", "heavy", "fragrant"];
/// Free-text fragments; some contain edge tokens to exercise leftmost-edge parsing.
const PHRASES: &[&str] = &[
    "A plain thing.",
    "It hums softly.",
    "Someone wrote IS_INSIDE on it.",
    "Worn smooth by many hands.",
    "ADD: not a mutation",
    "Smells of smoke and HAS_ATTRIBUTE dust.",
];

fn object_name(rng: &mut impl Rng) -> String {
    if rng.gen_bool(0.3) {
        NOUNS.choose(rng).unwrap().to_string()
    } else {
        format!("{} {}", ADJECTIVES.choose(rng).unwrap(), NOUNS.choose(rng).unwrap())
    }
}

fn pick<'a>(rng: &mut impl Rng, names: &'a [String]) -> Option<&'a String> {
    names.choose(rng)
}

/// Per-node property triples an object or character can carry.
fn property(rng: &mut impl Rng, name: &str, kind: NodeKind) -> Triple {
    let objects = [
        EdgeLabel::IsGettable,
        EdgeLabel::IsDrink,
        EdgeLabel::IsFood,
        EdgeLabel::IsContainer,
        EdgeLabel::IsSurface,
        EdgeLabel::IsWearable,
        EdgeLabel::IsWieldable,
    ];
    match (kind, rng.gen_range(0..4)) {
        (_, 0) => Triple::new(name, EdgeLabel::HasDescription, *PHRASES.choose(rng).unwrap()),
        (NodeKind::Room, _) => Triple::new(name, EdgeLabel::HasBackstory, *PHRASES.choose(rng).unwrap()),
        (NodeKind::Character, 1) => Triple::new(name, EdgeLabel::HasPersona, *PHRASES.choose(rng).unwrap()),
        (NodeKind::Character, _) => Triple::new(name, EdgeLabel::HasHealthLevel, rng.gen_range(0..10).to_string()),
        (NodeKind::Object, 1) => Triple::new(name, EdgeLabel::HasAttribute, *ATTRIBUTES.choose(rng).unwrap()),
        (NodeKind::Object, _) => Triple::boolean(name, *objects.choose(rng).unwrap(), rng.gen_bool(0.5)),
    }
}

/// A structurally valid random graph with at most `max_triples` state
/// triples. Entities form a forest under rooms; every node has its type.
pub fn random_graph(rng: &mut impl Rng, max_triples: usize) -> WorldGraph {
    let mut g = WorldGraph::new();
    let mut budget = max_triples;
    let mut rooms: Vec<String> = Vec::new();
    let mut characters: Vec<String> = Vec::new();
    let mut objects: Vec<String> = Vec::new();

    let add = |g: &mut WorldGraph, t: Triple, budget: &mut usize| {
        if *budget > 0 && !g.contains(&t) && g.upsert_triple(t).is_ok() {
            *budget -= 1;
        }
    };

    let n_rooms = rng.gen_range(1..=3);
    for name in ROOMS.choose_multiple(rng, n_rooms).collect::<Vec<_>>() {
        if budget == 0 {
            break;
        }
        g.add_node(name, NodeKind::Room).unwrap();
        add(&mut g, Triple::new(name, EdgeLabel::IsType, "room"), &mut budget);
        rooms.push(name.to_string());
    }
    let n_characters = rng.gen_range(0..=4);
    for name in CHARACTERS.choose_multiple(rng, n_characters).collect::<Vec<_>>() {
        if budget < 2 {
            break;
        }
        g.add_node(name, NodeKind::Character).unwrap();
        add(&mut g, Triple::new(name, EdgeLabel::IsType, "character"), &mut budget);
        let room = pick(rng, &rooms).unwrap().clone();
        add(&mut g, Triple::new(name, EdgeLabel::IsInside, room), &mut budget);
        characters.push(name.to_string());
    }
    for _ in 0..rng.gen_range(0..=10) {
        let name = object_name(rng);
        if budget < 2 || g.has_node_named(&name) {
            continue;
        }
        g.add_node(&name, NodeKind::Object).unwrap();
        add(&mut g, Triple::new(&name, EdgeLabel::IsType, "object"), &mut budget);
        // Parents are always earlier nodes, so no cycles arise.
        let placement = match rng.gen_range(0..5) {
            0 | 1 => Triple::new(&name, EdgeLabel::IsInside, pick(rng, &rooms).unwrap()),
            2 if !objects.is_empty() => Triple::new(&name, EdgeLabel::IsInside, pick(rng, &objects).unwrap()),
            _ if !characters.is_empty() => {
                let edge = *[EdgeLabel::IsCarrying, EdgeLabel::IsWearing, EdgeLabel::IsWielding]
                    .choose(rng)
                    .unwrap();
                Triple::new(pick(rng, &characters).unwrap(), edge, &name)
            }
            _ => Triple::new(&name, EdgeLabel::IsInside, pick(rng, &rooms).unwrap()),
        };
        add(&mut g, placement, &mut budget);
        objects.push(name);
    }
    let nodes: Vec<(String, NodeKind)> = rooms
        .iter()
        .map(|r| (r.clone(), NodeKind::Room))
        .chain(characters.iter().map(|c| (c.clone(), NodeKind::Character)))
        .chain(objects.iter().map(|o| (o.clone(), NodeKind::Object)))
        .collect();
    for _ in 0..rng.gen_range(0..=max_triples) {
        let (name, kind) = nodes.choose(rng).unwrap();
        let t = property(rng, name, *kind);
        add(&mut g, t, &mut budget);
    }
    g
}

/// Random edits of `base`: deletions, moves, new properties, and new nodes,
/// keeping the state within `max_triples`.
pub fn mutate_graph(rng: &mut impl Rng, base: &WorldGraph, max_triples: usize) -> WorldGraph {
    let mut g = base.clone();
    let edits = rng.gen_range(0..=8);
    for _ in 0..edits {
        let state: Vec<Triple> = g.triples().cloned().collect();
        match rng.gen_range(0..4) {
            0 => {
                if let Some(t) = state.choose(rng) {
                    g.remove_triple(t);
                }
            }
            1 => {
                // Move an entity somewhere else; upsert replaces its location.
                let placed: Vec<&Triple> = state.iter().filter(|t| t.edge.is_location()).collect();
                let rooms: Vec<String> = g.nodes_of_kind(NodeKind::Room).iter().map(|n| n.display_name.clone()).collect();
                if let (Some(t), Some(room)) = (placed.choose(rng), rooms.choose(rng)) {
                    let child = t.contained_party().unwrap().to_string();
                    let _ = g.upsert_triple(Triple::new(child, EdgeLabel::IsInside, room));
                }
            }
            2 => {
                let nodes: Vec<(String, NodeKind)> =
                    g.nodes().map(|n| (n.display_name.clone(), n.kind)).collect();
                if let Some((name, kind)) = nodes.choose(rng) {
                    let t = property(rng, name, *kind);
                    let _ = g.upsert_triple(t);
                }
            }
            _ => {
                let name = object_name(rng);
                let rooms: Vec<String> = g.nodes_of_kind(NodeKind::Room).iter().map(|n| n.display_name.clone()).collect();
                if !g.has_node_named(&name) {
                    if let Some(room) = rooms.choose(rng) {
                        g.add_node(&name, NodeKind::Object).unwrap();
                        let _ = g.upsert_triple(Triple::new(&name, EdgeLabel::IsType, "object"));
                        let _ = g.upsert_triple(Triple::new(&name, EdgeLabel::IsInside, room));
                    }
                }
            }
        }
    }
    // Trim back under the cap, preferring non-structural triples.
    while g.len() > max_triples {
        let victim = g
            .triples()
            .find(|t| !t.edge.is_location() && t.edge != EdgeLabel::IsType)
            .or_else(|| g.triples().next())
            .cloned()
            .unwrap();
        g.remove_triple(&victim);
    }
    g
}

/// A pair of graphs with at most `max_triples` state triples each. Half the
/// pairs are edits of a common base, half are independent draws.
pub fn random_graph_pair(rng: &mut impl Rng, max_triples: usize) -> (WorldGraph, WorldGraph) {
    let a = random_graph(rng, max_triples);
    let b = if rng.gen_bool(0.5) {
        mutate_graph(rng, &a, max_triples)
    } else {
        random_graph(rng, max_triples)
    };
    (a, b)
}

fn random_triple(rng: &mut impl Rng) -> Triple {
    let edge = *EdgeLabel::ALL.choose(rng).unwrap();
    let subject = if rng.gen_bool(0.5) {
        object_name(rng)
    } else {
        CHARACTERS.choose(rng).unwrap().to_string()
    };
    let value = if edge.is_boolean() {
        if rng.gen_bool(0.5) { "true" } else { "false" }.to_string()
    } else {
        match rng.gen_range(0..3) {
            0 => object_name(rng),
            1 => PHRASES.choose(rng).unwrap().to_string(),
            _ => ROOMS.choose(rng).unwrap().to_string(),
        }
    };
    Triple::new(subject, edge, value)
}

/// A syntactically valid random delta: `NoMutation` one time in ten,
/// otherwise up to twelve distinct mutations over any edge label.
pub fn random_delta(rng: &mut impl Rng) -> GraphDelta {
    if rng.gen_ratio(1, 10) {
        return GraphDelta::NoMutation;
    }
    let mut mutations: Vec<Mutation> = Vec::new();
    for _ in 0..rng.gen_range(1..=12) {
        let t = random_triple(rng);
        let m = if rng.gen_bool(0.5) { Mutation::add(t) } else { Mutation::del(t) };
        if !mutations.contains(&m) {
            mutations.push(m);
        }
    }
    GraphDelta::from_mutations(mutations).expect("mutations are distinct")
}

/// A synthetic UseEvent corpus of `n` events. Events come in clusters of one
/// to eight that draw both objects from a private three-name pool, so the
/// corpus splits into many object-disjoint groups.
pub fn synthetic_use_events(n: usize, seed: u64) -> Vec<UseEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(n);
    let mut cluster = 0usize;
    while events.len() < n {
        let size = rng.gen_range(1..=8).min(n - events.len());
        let pool: Vec<String> = (0..3)
            .map(|j| format!("{} {} {cluster}-{j}", ADJECTIVES.choose(&mut rng).unwrap(), NOUNS.choose(&mut rng).unwrap()))
            .collect();
        for _ in 0..size {
            let pair: Vec<&String> = pool.choose_multiple(&mut rng, 2).collect();
            events.push(synthetic_event(&mut rng, pair[0], pair[1]));
        }
        cluster += 1;
    }
    events
}

fn synthetic_event(rng: &mut impl Rng, primary: &str, secondary: &str) -> UseEvent {
    let attribute = ATTRIBUTES.choose(rng).unwrap().to_string();
    let kind = match rng.gen_range(0..10) {
        0 => EventKind::Boring,
        1 => EventKind::Failed,
        _ => EventKind::Success,
    };
    let final_objects = if kind == EventKind::Success {
        vec![FinalObjectState {
            name: primary.to_string(),
            description: format!("The {primary}, changed."),
            location: LocationSpec::HeldByActor,
            attribute_changes: vec![AttributeChange { sign: ChangeSign::Add, attribute }],
        }]
    } else {
        Vec::new()
    };
    let spec = |name: &str| ObjectSpec {
        name: name.to_string(),
        description: format!("A {name}."),
        required_attributes: Vec::new(),
        held: None,
    };
    UseEvent {
        phrase: format!("use {primary} with {secondary}"),
        narration: format!("You use the {primary} with the {secondary}."),
        alternate: None,
        external_template: format!("{{actor}} uses the {primary} with the {secondary}."),
        initial_primary: spec(primary),
        initial_secondary: spec(secondary),
        final_objects,
        kind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graphs_respect_the_cap_and_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (a, b) = random_graph_pair(&mut rng, 60);
            for g in [&a, &b] {
                assert!(g.len() <= 60);
                g.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn corpus_is_seeded_and_sized() {
        let a = synthetic_use_events(300, 9);
        assert_eq!(a.len(), 300);
        assert_eq!(a, synthetic_use_events(300, 9));
        assert_ne!(a, synthetic_use_events(300, 10));
    }
}
