use serde::{Deserialize, Serialize};

use super::action::{parse_action, CanonicalAction, ParseError, Verb};
use super::narrate::{narration_for, templated_narration};
use super::{EngineError, World};
use crate::graph::{diff, EdgeLabel, GraphDelta, NodeKind, NodeRef, Triple, TriplePattern};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    fn invalid(reason: &str) -> Self {
        Validity::Invalid(reason.to_string())
    }
}

/// Outcome of one action. Invalid results always carry `NoMutation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    /// `None` when the text could not be parsed into an action.
    pub action: Option<CanonicalAction>,
    pub validity: Validity,
    pub delta: GraphDelta,
    /// Second-person narration for the actor.
    pub narration: String,
    /// Characters that witnessed the action, sorted by name.
    pub observers: Vec<NodeRef>,
}

impl ExecutionResult {
    fn rejected(action: Option<CanonicalAction>, reason: &str, narration: String, actor: &NodeRef) -> Self {
        ExecutionResult {
            action,
            validity: Validity::invalid(reason),
            delta: GraphDelta::NoMutation,
            narration,
            observers: vec![actor.clone()],
        }
    }
}

fn require_actor<'w>(world: &'w World, actor: &str) -> Result<&'w NodeRef, EngineError> {
    match world.node(actor) {
        Some(n) if n.kind == NodeKind::Character && world.room_of(actor).is_some() => Ok(n),
        _ => Err(EngineError::UnknownActor(actor.to_string())),
    }
}

fn target(n: &Option<NodeRef>, kind: NodeKind) -> Result<&str, Validity> {
    match n {
        None => Err(Validity::invalid("missing target")),
        Some(n) if n.kind != kind => Err(Validity::invalid(match kind {
            NodeKind::Object => "not an object",
            NodeKind::Character => "not a character",
            NodeKind::Room => "not a room",
        })),
        Some(n) => Ok(&n.display_name),
    }
}

/// A character other than the actor, alive and in the actor's room.
fn other_here(world: &World, actor: &str, who: &str) -> Result<(), Validity> {
    if who == actor {
        return Err(Validity::invalid("cannot target self"));
    }
    if !world.same_room(actor, who) {
        return Err(Validity::invalid("not here"));
    }
    Ok(())
}

fn check(world: &World, actor: &str, action: &CanonicalAction) -> Result<(), Validity> {
    if world.is_dead(actor) {
        return Err(Validity::invalid("actor is dead"));
    }
    let p = &action.primary;
    let s = &action.secondary;
    match action.verb {
        Verb::Say => {
            if action.raw_text.trim().is_empty() {
                return Err(Validity::invalid("nothing to say"));
            }
        }
        Verb::Get => {
            let x = target(p, NodeKind::Object)?;
            if world.holds(actor, x) {
                return Err(Validity::invalid("already carried"));
            }
            if !world.co_located(actor, x) {
                return Err(Validity::invalid("not here"));
            }
            if let Some(from) = s {
                if world.graph.parent_of(x) != Some(from.display_name.as_str()) {
                    return Err(Validity::invalid("not there"));
                }
            }
            if !world.graph.is_true(x, EdgeLabel::IsGettable) {
                return Err(Validity::invalid("not gettable"));
            }
        }
        Verb::Drop => {
            let x = target(p, NodeKind::Object)?;
            if !world.holds(actor, x) {
                return Err(Validity::invalid("not carrying that"));
            }
        }
        Verb::Put => {
            let x = target(p, NodeKind::Object)?;
            let c = target(s, NodeKind::Object)?;
            if !world.holds(actor, x) {
                return Err(Validity::invalid("not carrying that"));
            }
            if !world.available(actor, c) {
                return Err(Validity::invalid("not here"));
            }
            if !(world.graph.is_true(c, EdgeLabel::IsContainer)
                || world.graph.is_true(c, EdgeLabel::IsSurface))
            {
                return Err(Validity::invalid("not a container"));
            }
            if x == c || world.graph.descendants_of(x).iter().any(|d| d == c) {
                return Err(Validity::invalid("would contain itself"));
            }
        }
        Verb::Give => {
            let x = target(p, NodeKind::Object)?;
            let c = target(s, NodeKind::Character)?;
            if !world.holds(actor, x) {
                return Err(Validity::invalid("not carrying that"));
            }
            other_here(world, actor, c)?;
        }
        Verb::Steal => {
            let x = target(p, NodeKind::Object)?;
            let c = target(s, NodeKind::Character)?;
            other_here(world, actor, c)?;
            if !world.holds(c, x) {
                return Err(Validity::invalid("they do not have that"));
            }
        }
        Verb::Wear => {
            let x = target(p, NodeKind::Object)?;
            if !world.graph.is_true(x, EdgeLabel::IsWearable) {
                return Err(Validity::invalid("not wearable"));
            }
            if world.holds_with(actor, EdgeLabel::IsWearing, x) {
                return Err(Validity::invalid("already worn"));
            }
            if !world.holds(actor, x) {
                return Err(Validity::invalid("not carrying that"));
            }
        }
        Verb::Wield => {
            let x = target(p, NodeKind::Object)?;
            if !world.graph.is_true(x, EdgeLabel::IsWieldable) {
                return Err(Validity::invalid("not wieldable"));
            }
            if world.holds_with(actor, EdgeLabel::IsWielding, x) {
                return Err(Validity::invalid("already wielded"));
            }
            if !world.holds(actor, x) {
                return Err(Validity::invalid("not carrying that"));
            }
        }
        Verb::Remove => {
            let x = target(p, NodeKind::Object)?;
            if !(world.holds_with(actor, EdgeLabel::IsWearing, x)
                || world.holds_with(actor, EdgeLabel::IsWielding, x))
            {
                return Err(Validity::invalid("not worn or wielded"));
            }
        }
        Verb::Eat | Verb::Drink => {
            let x = target(p, NodeKind::Object)?;
            let (edge, reason) = if action.verb == Verb::Eat {
                (EdgeLabel::IsFood, "not edible")
            } else {
                (EdgeLabel::IsDrink, "not drinkable")
            };
            if !world.graph.is_true(x, edge) {
                return Err(Validity::invalid(reason));
            }
            if !world.available(actor, x) {
                return Err(Validity::invalid("not here"));
            }
        }
        Verb::Follow | Verb::Hug => {
            let c = target(p, NodeKind::Character)?;
            other_here(world, actor, c)?;
        }
        Verb::Hit => {
            let c = target(p, NodeKind::Character)?;
            other_here(world, actor, c)?;
            if world.is_dead(c) {
                return Err(Validity::invalid("already dead"));
            }
            if let Some(w) = s {
                if !world.holds(actor, &w.display_name) {
                    return Err(Validity::invalid("not carrying that"));
                }
            }
        }
        Verb::Go => {
            let r = target(p, NodeKind::Room)?;
            let here = world.room_of(actor).unwrap_or_default();
            if r == here {
                return Err(Validity::invalid("already here"));
            }
            if !world.neighbors_of(here).any(|n| n == r) {
                return Err(Validity::invalid("not reachable"));
            }
        }
        Verb::Use => {
            let x = target(p, NodeKind::Object)?;
            let y = target(s, NodeKind::Object)?;
            if x == y {
                return Err(Validity::invalid("cannot target self"));
            }
            if !(world.available(actor, x) && world.available(actor, y)) {
                return Err(Validity::invalid("not here"));
            }
        }
    }
    Ok(())
}

/// Checks the attribute and location preconditions of `action`.
pub fn validate(world: &World, actor: &str, action: &CanonicalAction) -> Validity {
    match check(world, actor, action) {
        Ok(()) => Validity::Valid,
        Err(v) => v,
    }
}

/// State changes of a validated action. Location moves rely on upsert
/// replacing the previous location triple.
fn apply_semantics(world: &mut World, actor: &str, action: &CanonicalAction) -> Result<(), EngineError> {
    let p = action.primary_name().to_string();
    let s = action.secondary_name().to_string();
    let g = &mut world.graph;
    match action.verb {
        Verb::Get => g.upsert_triple(Triple::new(actor, EdgeLabel::IsCarrying, &p))?,
        Verb::Drop => {
            let room = g.room_of(actor).unwrap_or_default().to_string();
            g.upsert_triple(Triple::new(&p, EdgeLabel::IsInside, room))?;
        }
        Verb::Put => g.upsert_triple(Triple::new(&p, EdgeLabel::IsInside, &s))?,
        Verb::Give => g.upsert_triple(Triple::new(&s, EdgeLabel::IsCarrying, &p))?,
        Verb::Steal | Verb::Remove => g.upsert_triple(Triple::new(actor, EdgeLabel::IsCarrying, &p))?,
        Verb::Wear => g.upsert_triple(Triple::new(actor, EdgeLabel::IsWearing, &p))?,
        Verb::Wield => g.upsert_triple(Triple::new(actor, EdgeLabel::IsWielding, &p))?,
        Verb::Eat | Verb::Drink => {
            if let Some(loc) = g.location_of(&p).cloned() {
                g.remove_triple(&loc);
            }
            g.remove_matching(TriplePattern::any().edge(EdgeLabel::Contains).value(&p));
            g.upsert_triple(Triple::new(&p, EdgeLabel::HasAttribute, "consumed"))?;
        }
        Verb::Hit => {
            let health = world.health(&p) - world.strength(actor);
            let health = health.max(0);
            let g = &mut world.graph;
            g.set_unique(&p, EdgeLabel::HasHealthLevel, health.to_string())?;
            if health == 0 {
                g.set_unique(&p, EdgeLabel::IsDead, "true")?;
            }
        }
        Verb::Go => g.upsert_triple(Triple::new(actor, EdgeLabel::IsInside, &p))?,
        Verb::Follow | Verb::Hug | Verb::Say | Verb::Use => {}
    }
    Ok(())
}

/// Validates and executes `action`, mutating `world` only when valid.
///
/// A valid action appends one `HAD_ACTED` triple for the actor, one
/// `HAD_SAID` for speech, and one `OBSERVED` per character present in the
/// actor's room before the action (actor included), holding the narration
/// from that character's point of view.
pub fn execute(world: &mut World, actor: &str, action: &CanonicalAction) -> Result<ExecutionResult, EngineError> {
    let actor_ref = require_actor(world, actor)?.clone();
    let validity = validate(world, actor, action);
    if let Validity::Invalid(reason) = &validity {
        let narration = templated_narration(action, &validity);
        return Ok(ExecutionResult::rejected(Some(action.clone()), reason, narration, &actor_ref));
    }

    let room = world.room_of(actor).unwrap_or_default().to_string();
    let observers: Vec<NodeRef> = world
        .characters_in(&room)
        .iter()
        .filter_map(|c| world.node(c).cloned())
        .collect();
    let before = world.graph.clone();
    apply_semantics(world, actor, action)?;
    let delta = diff(&before, &world.graph);

    world.graph.push_history(Triple::new(actor, EdgeLabel::HadActed, action.text()))?;
    if action.verb == Verb::Say {
        world.graph.push_history(Triple::new(actor, EdgeLabel::HadSaid, &action.raw_text))?;
    }
    for o in &observers {
        let line = narration_for(action, actor, &o.display_name, &validity);
        world
            .graph
            .push_history(Triple::new(&o.display_name, EdgeLabel::Observed, line))?;
    }
    world.check_invariants()?;

    Ok(ExecutionResult {
        action: Some(action.clone()),
        narration: templated_narration(action, &validity),
        validity,
        delta,
        observers,
    })
}

/// Parses and executes free text. Parse failures become invalid results
/// rather than errors, so a player always gets a narration back.
pub fn act(world: &mut World, actor: &str, text: &str) -> Result<ExecutionResult, EngineError> {
    let actor_ref = require_actor(world, actor)?.clone();
    match parse_action(text, world, actor) {
        Ok(action) => execute(world, actor, &action),
        Err(ParseError::UnknownVerb { verb, .. }) => Ok(ExecutionResult::rejected(
            None,
            "unknown verb",
            format!("You can't {verb} that!"),
            &actor_ref,
        )),
        Err(ParseError::UnknownTarget(_)) => Ok(ExecutionResult::rejected(
            None,
            "unknown target",
            "You don't see that here.".to_string(),
            &actor_ref,
        )),
        Err(ParseError::Unparseable(_)) => Ok(ExecutionResult::rejected(
            None,
            "unparseable",
            "You can't do that!".to_string(),
            &actor_ref,
        )),
    }
}
