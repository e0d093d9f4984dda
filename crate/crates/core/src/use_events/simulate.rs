use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{object_key, render_external, ChangeSign, LocationSpec, UseEvent, UseEventError};
use crate::engine::World;
use crate::graph::{diff, EdgeLabel, GraphDelta, NodeKind, Triple, TriplePattern, WorldGraph};

/// Attribute names that have a dedicated boolean edge.
pub fn attribute_edge(attribute: &str) -> Option<EdgeLabel> {
    match attribute {
        "wearable" => Some(EdgeLabel::IsWearable),
        "wieldable" => Some(EdgeLabel::IsWieldable),
        "food" => Some(EdgeLabel::IsFood),
        "drink" => Some(EdgeLabel::IsDrink),
        "container" => Some(EdgeLabel::IsContainer),
        "surface" => Some(EdgeLabel::IsSurface),
        "gettable" => Some(EdgeLabel::IsGettable),
        _ => None,
    }
}

fn actor_room(world: &World, actor: &str) -> Result<String, UseEventError> {
    match (world.graph.kind_of(actor), world.room_of(actor)) {
        (Some(NodeKind::Character), Some(room)) => Ok(room.to_string()),
        _ => Err(UseEventError::UnknownActor(actor.to_string())),
    }
}

fn set_attribute(g: &mut WorldGraph, name: &str, attribute: &str, present: bool) -> Result<(), UseEventError> {
    match (attribute_edge(attribute), present) {
        (Some(edge), v) => g.set_unique(name, edge, if v { "true" } else { "false" })?,
        (None, true) => g.upsert_triple(Triple::new(name, EdgeLabel::HasAttribute, attribute))?,
        (None, false) => {
            g.remove_triple(&Triple::new(name, EdgeLabel::HasAttribute, attribute));
        }
    }
    Ok(())
}

/// Inserts the event's two objects where absent: the held one carried by the
/// actor, the other placed in the actor's room. Required attributes are
/// ensured on both. Running it twice changes nothing further.
pub fn instantiate(world: &World, event: &UseEvent, actor: &str) -> Result<World, UseEventError> {
    let room = actor_room(world, actor)?;
    let mut out = world.clone();
    let g = &mut out.graph;
    for (i, spec) in event.initial_objects().into_iter().enumerate() {
        let name = object_key(&spec.name);
        if !g.has_node_named(&name) {
            g.add_node(&name, NodeKind::Object)?;
            g.upsert_triple(Triple::new(&name, EdgeLabel::IsType, "object"))?;
            if !spec.description.trim().is_empty() {
                g.upsert_triple(Triple::new(&name, EdgeLabel::HasDescription, &spec.description))?;
            }
            let held = spec.held.unwrap_or(i == 0);
            if held {
                g.upsert_triple(Triple::new(actor, EdgeLabel::IsCarrying, &name))?;
            } else {
                g.upsert_triple(Triple::new(&name, EdgeLabel::IsInside, &room))?;
            }
        }
        for a in &spec.required_attributes {
            set_attribute(g, &name, a, true)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseOutcome {
    pub world: World,
    pub delta: GraphDelta,
    /// The actor's own narration.
    pub narration: String,
    /// Third-person narration for other characters in the room.
    pub external: String,
}

/// Moves every triple mentioning `from` as an entity onto `to`.
fn rename(g: &mut WorldGraph, from: &str, to: &str) -> Result<(), UseEventError> {
    if !g.has_node_named(to) {
        g.add_node(to, NodeKind::Object)?;
    }
    let moved: Vec<Triple> = g
        .triples()
        .filter(|t| {
            t.subject == from
                || ((t.edge.is_location() || t.edge == EdgeLabel::Contains) && t.value == from)
        })
        .cloned()
        .collect();
    for t in &moved {
        g.remove_triple(t);
    }
    for t in moved {
        let subject = if t.subject == from { to.to_string() } else { t.subject };
        let entity_valued = t.edge.is_location() || t.edge == EdgeLabel::Contains;
        let value = if entity_valued && t.value == from {
            to.to_string()
        } else {
            t.value
        };
        g.upsert_triple(Triple::new(subject, t.edge, value))?;
    }
    Ok(())
}

/// Equal up to a plural `s`.
fn same_word(a: &str, b: &str) -> bool {
    a.trim_end_matches('s') == b.trim_end_matches('s')
}

/// Pairs final objects that match no initial object with an unmatched
/// initial object they replace: one whose original location they take, else
/// one sharing a name word. Returns final key -> initial key.
fn pair_renames(event: &UseEvent) -> BTreeMap<String, String> {
    let initial = event.object_keys();
    let finals: Vec<String> = event.final_objects.iter().map(|f| object_key(&f.name)).collect();
    let mut free: Vec<&String> = initial.iter().filter(|i| !finals.contains(i)).collect();
    let mut out = BTreeMap::new();
    for f in &event.final_objects {
        let fk = object_key(&f.name);
        if initial.contains(&fk) {
            continue;
        }
        let by_location = match &f.location {
            LocationSpec::OriginalLocationOf(n) => free.iter().position(|i| **i == object_key(n)),
            _ => None,
        };
        let by_word = || {
            free.iter().position(|i| {
                i.split_whitespace()
                    .any(|w| w.len() >= 3 && fk.split_whitespace().any(|x| same_word(x, w)))
            })
        };
        if let Some(pos) = by_location.or_else(by_word) {
            out.insert(fk, free.remove(pos).clone());
        }
    }
    out
}

/// Applies an instantiated event. Success events rewrite the two initial
/// objects into the final states: renamed objects carry their triples over,
/// initial objects with no final counterpart lose their location and gain
/// `HAS_ATTRIBUTE consumed`, and each final object gets its description,
/// location, and attribute changes. Boring and failed events change no state.
///
/// Either way the actor records one `HAD_ACTED`, and every character in the
/// room records an `OBSERVED` line.
pub fn apply_use_event(world: &World, event: &UseEvent, actor: &str) -> Result<UseOutcome, UseEventError> {
    let room = actor_room(world, actor)?;
    let before = world.graph.clone();
    let mut after = world.clone();
    let [primary, secondary] = event.object_keys();
    for k in [&primary, &secondary] {
        if !before.has_node_named(k) {
            return Err(UseEventError::InconsistentFinalState(format!(
                "`{k}` is not in the world; instantiate first"
            )));
        }
    }

    if event.kind == super::EventKind::Success {
        let g = &mut after.graph;
        let renames = pair_renames(event);
        let finals: Vec<String> = event.final_objects.iter().map(|f| object_key(&f.name)).collect();
        let pre_location = |k: &str| before.location_of(k).cloned();

        for (to, from) in &renames {
            rename(g, from, to)?;
        }
        // The object a name refers to after renames.
        let current = |k: &str| -> String {
            renames
                .iter()
                .find(|(_, from)| from.as_str() == k)
                .map(|(to, _)| to.clone())
                .unwrap_or_else(|| k.to_string())
        };
        for k in [&primary, &secondary] {
            if finals.contains(k) || renames.values().any(|v| v == k) {
                continue;
            }
            if let Some(loc) = g.location_of(k).cloned() {
                g.remove_triple(&loc);
            }
            g.remove_matching(TriplePattern::any().edge(EdgeLabel::Contains).value(k));
            g.upsert_triple(Triple::new(k, EdgeLabel::HasAttribute, "consumed"))?;
        }

        let mut placements = Vec::new();
        for (f, key) in event.final_objects.iter().zip(&finals) {
            if !g.has_node_named(key) {
                g.add_node(key, NodeKind::Object)?;
                g.upsert_triple(Triple::new(key, EdgeLabel::IsType, "object"))?;
            }
            if !f.description.trim().is_empty() {
                g.set_unique(key, EdgeLabel::HasDescription, &f.description)?;
            }
            let anchor = |n: &str| -> Result<String, UseEventError> {
                let target = current(&object_key(n));
                if !finals.contains(&target) && !g.has_node_named(&target) {
                    return Err(UseEventError::InconsistentFinalState(format!("`{n}` does not exist")));
                }
                Ok(target)
            };
            let t = match &f.location {
                LocationSpec::InRoom => Triple::new(key, EdgeLabel::IsInside, &room),
                LocationSpec::HeldByActor => Triple::new(actor, EdgeLabel::IsCarrying, key),
                LocationSpec::WornByActor => Triple::new(actor, EdgeLabel::IsWearing, key),
                LocationSpec::InsideObject(n) | LocationSpec::OnObject(n) => {
                    Triple::new(key, EdgeLabel::IsInside, anchor(n)?)
                }
                LocationSpec::OriginalLocationOf(n) => {
                    let source = object_key(n);
                    let loc = pre_location(&source)
                        .or_else(|| renames.get(&source).and_then(|s| pre_location(s)))
                        .ok_or_else(|| {
                            UseEventError::InconsistentFinalState(format!("`{n}` had no location"))
                        })?;
                    if loc.edge == EdgeLabel::IsInside {
                        Triple::new(key, EdgeLabel::IsInside, current(&loc.value))
                    } else {
                        Triple::new(&loc.subject, loc.edge, key)
                    }
                }
            };
            placements.push(t);
        }
        // Clear all old placements first so intermediate states cannot cycle.
        for key in &finals {
            if let Some(loc) = g.location_of(key).cloned() {
                g.remove_triple(&loc);
            }
        }
        for t in placements {
            g.upsert_triple(t)?;
        }
        for (f, key) in event.final_objects.iter().zip(&finals) {
            for c in &f.attribute_changes {
                set_attribute(g, key, &c.attribute, c.sign == ChangeSign::Add)?;
            }
        }
    }

    let delta = diff(&before, &after.graph);
    let external = render_external(event, actor);
    let observers = world.characters_in(&room);
    let g = &mut after.graph;
    g.push_history(Triple::new(
        actor,
        EdgeLabel::HadActed,
        format!("use {primary} with {secondary}"),
    ))?;
    for o in observers {
        let line = if o == actor { &event.narration } else { &external };
        g.push_history(Triple::new(&o, EdgeLabel::Observed, line))?;
    }
    after
        .check_invariants()
        .map_err(|e| UseEventError::InconsistentFinalState(e.to_string()))?;
    Ok(UseOutcome {
        world: after,
        delta,
        narration: event.narration.clone(),
        external,
    })
}
