use rand::seq::SliceRandom;
use rand::Rng;

use super::action::{CanonicalAction, Verb};
use super::rules::validate;
use super::{EngineError, World};
use crate::graph::NodeKind;

/// Every well-formed action for `actor` over what it can currently see, in a
/// fixed order. Speech is excluded since it needs an utterance.
pub fn enumerate_actions(world: &World, actor: &str) -> Vec<CanonicalAction> {
    let Some(room) = world.room_of(actor).map(str::to_string) else {
        return Vec::new();
    };
    let node = |n: &str| world.node(n).cloned();
    let objects: Vec<String> = world
        .visible_names(actor)
        .into_iter()
        .filter(|n| world.is_kind(n, NodeKind::Object))
        .collect();
    let characters: Vec<String> = world
        .characters_in(&room)
        .into_iter()
        .filter(|c| c != actor)
        .collect();

    let mut out = Vec::new();
    for o in &objects {
        for verb in [
            Verb::Get,
            Verb::Drop,
            Verb::Wear,
            Verb::Remove,
            Verb::Wield,
            Verb::Eat,
            Verb::Drink,
        ] {
            out.push(CanonicalAction::new(verb, node(o), None));
        }
        for c in &characters {
            out.push(CanonicalAction::new(Verb::Give, node(o), node(c)));
            out.push(CanonicalAction::new(Verb::Steal, node(o), node(c)));
        }
        for other in objects.iter().filter(|x| *x != o) {
            out.push(CanonicalAction::new(Verb::Put, node(o), node(other)));
        }
    }
    for c in &characters {
        for verb in [Verb::Follow, Verb::Hit, Verb::Hug] {
            out.push(CanonicalAction::new(verb, node(c), None));
        }
    }
    for r in world.neighbors_of(&room) {
        out.push(CanonicalAction::new(Verb::Go, node(r), None));
    }
    out
}

/// Uniform draw over enumerated actions; restricted to valid ones unless
/// `include_invalid` is set.
pub fn random_action<R: Rng + ?Sized>(
    world: &World,
    actor: &str,
    rng: &mut R,
    include_invalid: bool,
) -> Result<CanonicalAction, EngineError> {
    let mut pool = enumerate_actions(world, actor);
    if !include_invalid {
        pool.retain(|a| validate(world, actor, a).is_valid());
    }
    pool.choose(rng)
        .cloned()
        .ok_or_else(|| EngineError::NoActionsAvailable(actor.to_string()))
}
