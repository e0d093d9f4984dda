use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::context::{assemble_context, ContextConfig, ContextTrace, View};
use super::prompts::{choose_prompt, graph_update_prompt, narration_prompt, PromptKind};
use super::{Provenance, TaskError, TaskExample, TaskKind};
use crate::engine::{execute, CanonicalAction, World};
use crate::graph::{serialize_delta, serialize_triples, EdgeLabel, GraphDelta, NodeKind, Triple};
use crate::use_events::{apply_use_event, instantiate, object_key, UseEvent};

/// An example together with the dropout decisions that shaped its input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Built {
    pub example: TaskExample,
    pub trace: ContextTrace,
}

/// How an engine action was obtained; decides the task kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionOrigin {
    /// Recorded in a playthrough.
    Game,
    /// A random valid draw.
    SelfPlay,
    /// A random invalid draw.
    InvalidSelfPlay,
}

#[derive(Debug, Clone, Copy)]
pub enum ActionSource<'a> {
    Engine { action: &'a CanonicalAction, origin: ActionOrigin },
    /// `index` locates the event in its corpus for provenance.
    UseEvent { event: &'a UseEvent, index: usize },
}

impl ActionSource<'_> {
    fn tasks(&self) -> (TaskKind, TaskKind) {
        match self {
            ActionSource::Engine { origin: ActionOrigin::Game, .. } => {
                (TaskKind::GameActions, TaskKind::GameActionsNarration)
            }
            ActionSource::Engine { origin: ActionOrigin::SelfPlay, .. } => {
                (TaskKind::SelfPlayActions, TaskKind::SelfPlayActionsNarration)
            }
            ActionSource::Engine { origin: ActionOrigin::InvalidSelfPlay, .. } => {
                (TaskKind::InvalidSelfPlay, TaskKind::InvalidSelfPlayNarration)
            }
            ActionSource::UseEvent { .. } => (TaskKind::UseEventActions, TaskKind::UseEventActionsNarration),
        }
    }

    /// The `{act}` slot of action prompts.
    fn act_text(&self) -> String {
        match self {
            ActionSource::Engine { action, .. } => action.text(),
            ActionSource::UseEvent { event, .. } => {
                let mut chars = event.phrase.trim().chars();
                match chars.next() {
                    Some(c) => c.to_lowercase().chain(chars).collect(),
                    None => String::new(),
                }
            }
        }
    }
}

/// An action carried out on a copy of the world.
struct ActionRun {
    /// The world the model sees: pre-action, with UseEvent objects inserted.
    context: World,
    delta: GraphDelta,
    /// Narration per perceiving character.
    narrations: BTreeMap<String, String>,
    targets: Vec<String>,
}

fn run_action(world: &World, actor: &str, source: &ActionSource<'_>) -> Result<ActionRun, TaskError> {
    match source {
        ActionSource::Engine { action, .. } => {
            let mut after = world.clone();
            let result = execute(&mut after, actor, action)?;
            let mut narrations = observed_since(world, &after);
            if narrations.is_empty() {
                narrations.insert(actor.to_string(), result.narration);
            }
            let targets = [&action.primary, &action.secondary]
                .into_iter()
                .flatten()
                .map(|n| n.display_name.clone())
                .collect();
            Ok(ActionRun { context: world.clone(), delta: result.delta, narrations, targets })
        }
        ActionSource::UseEvent { event, .. } => {
            let context = instantiate(world, event, actor)?;
            let outcome = apply_use_event(&context, event, actor)?;
            let narrations = observed_since(&context, &outcome.world);
            Ok(ActionRun {
                targets: event.object_keys().to_vec(),
                context,
                delta: outcome.delta,
                narrations,
            })
        }
    }
}

/// `OBSERVED` lines appended between two states of one world.
fn observed_since(before: &World, after: &World) -> BTreeMap<String, String> {
    after.graph.history()[before.graph.history().len()..]
        .iter()
        .filter(|t| t.edge == EdgeLabel::Observed)
        .map(|t| (t.subject.clone(), t.value.clone()))
        .collect()
}

/// Triples an action's label depends on: everything it deletes, and where
/// the actor and targets are.
pub fn protected_for(world: &World, actor: &str, targets: &[String], delta: &GraphDelta) -> BTreeSet<Triple> {
    let mut out: BTreeSet<Triple> = delta.deletions().cloned().collect();
    for name in std::iter::once(actor).chain(targets.iter().map(String::as_str)) {
        if let Some(t) = world.graph.location_of(name) {
            out.insert(t.clone());
        }
    }
    out
}

fn provenance_for(world: &World, actor: &str, source: &ActionSource<'_>) -> Provenance {
    Provenance {
        world: world.id.clone(),
        event: match source {
            ActionSource::UseEvent { index, .. } => Some(*index),
            _ => None,
        },
        actor: Some(actor.to_string()),
        action: Some(source.act_text()),
        ..Default::default()
    }
}

/// Graph update task: predict the delta of `source` performed by `actor`.
pub fn build_graph_update_example(
    world: &World,
    actor: &str,
    source: &ActionSource<'_>,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = run_action(world, actor, source)?;
    let protected = protected_for(&run.context, actor, &run.targets, &run.delta);
    let prompt = graph_update_prompt(actor, &source.act_text());
    let ctx = assemble_context(
        &run.context,
        &View::Character(actor.to_string()),
        &prompt,
        &protected,
        cfg,
        &mut rng,
    )?;
    Ok(Built {
        example: TaskExample {
            task: source.tasks().0,
            input: ctx.text,
            label: serialize_delta(&run.delta),
            seed,
            provenance: provenance_for(world, actor, source),
        },
        trace: ctx.trace,
    })
}

/// Narration task: predict what `observer` perceives when `actor` performs
/// `source`. Invalid actions are perceived by the actor alone.
pub fn build_narration_example(
    world: &World,
    actor: &str,
    observer: &str,
    source: &ActionSource<'_>,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = run_action(world, actor, source)?;
    let label = run
        .narrations
        .get(observer)
        .cloned()
        .ok_or_else(|| TaskError::ObserverNotPresent {
            observer: observer.to_string(),
            actor: actor.to_string(),
        })?;
    let protected = protected_for(&run.context, actor, &run.targets, &run.delta);
    let prompt = narration_prompt(observer, actor, &source.act_text());
    let ctx = assemble_context(
        &run.context,
        &View::Character(observer.to_string()),
        &prompt,
        &protected,
        cfg,
        &mut rng,
    )?;
    let mut provenance = provenance_for(world, actor, source);
    provenance.observer = Some(observer.to_string());
    Ok(Built {
        example: TaskExample { task: source.tasks().1, input: ctx.text, label, seed, provenance },
        trace: ctx.trace,
    })
}

/// The characters who would perceive `source`, in name order.
pub(crate) fn perceivers(world: &World, actor: &str, source: &ActionSource<'_>) -> Result<Vec<String>, TaskError> {
    Ok(run_action(world, actor, source)?.narrations.into_keys().collect())
}

/// Element classes removable for element tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    /// A character in a room.
    Character,
    /// An object lying directly in a room.
    Object,
    /// An object inside another object.
    Contained,
    Worn,
    Wielded,
    Carried,
}

impl ElementKind {
    pub const ALL: [ElementKind; 6] = [
        ElementKind::Character,
        ElementKind::Object,
        ElementKind::Contained,
        ElementKind::Worn,
        ElementKind::Wielded,
        ElementKind::Carried,
    ];

    pub fn task(self) -> TaskKind {
        match self {
            ElementKind::Character => TaskKind::AddCharacter,
            ElementKind::Object => TaskKind::AddObject,
            ElementKind::Contained => TaskKind::AddObjectContains,
            ElementKind::Worn => TaskKind::AddCharacterWearing,
            ElementKind::Wielded => TaskKind::AddCharacterWielding,
            ElementKind::Carried => TaskKind::AddCharacterCarrying,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ElementKind::Character => "character",
            ElementKind::Object => "object",
            ElementKind::Contained => "contained",
            ElementKind::Worn => "worn",
            ElementKind::Wielded => "wielded",
            ElementKind::Carried => "carried",
        }
    }

    fn prompt(self) -> PromptKind {
        match self {
            ElementKind::Character => PromptKind::AddCharacter,
            ElementKind::Object => PromptKind::AddObject,
            ElementKind::Contained => PromptKind::AddContained,
            ElementKind::Worn => PromptKind::AddWorn,
            ElementKind::Wielded => PromptKind::AddWielded,
            ElementKind::Carried => PromptKind::AddCarried,
        }
    }

    /// Whether the placing triple `t` of an element of `kind` matches.
    fn places(self, world: &World, t: &Triple) -> bool {
        let Some(child) = t.contained_party() else { return false };
        let child_kind = world.graph.kind_of(child);
        let holder_kind = t.container_party().and_then(|h| world.graph.kind_of(h));
        match self {
            ElementKind::Character => {
                t.edge == EdgeLabel::IsInside && child_kind == Some(NodeKind::Character)
            }
            ElementKind::Object => {
                t.edge == EdgeLabel::IsInside
                    && child_kind == Some(NodeKind::Object)
                    && holder_kind == Some(NodeKind::Room)
            }
            ElementKind::Contained => {
                t.edge == EdgeLabel::IsInside
                    && child_kind == Some(NodeKind::Object)
                    && holder_kind == Some(NodeKind::Object)
            }
            ElementKind::Worn => t.edge == EdgeLabel::IsWearing,
            ElementKind::Wielded => t.edge == EdgeLabel::IsWielding,
            ElementKind::Carried => t.edge == EdgeLabel::IsCarrying,
        }
    }
}

/// An entity's own triples: those it is the subject of, minus the carrier
/// triples placing things it holds, plus the triple that places it.
fn own_triples(world: &World, name: &str) -> BTreeSet<Triple> {
    let mut out: BTreeSet<Triple> = world
        .graph
        .triples()
        .filter(|t| t.subject == name && !t.edge.is_carrier())
        .cloned()
        .collect();
    if let Some(t) = world.graph.location_of(name) {
        out.insert(t.clone());
    }
    out
}

/// `world` without `name`, the things it holds, and any triple about them.
fn without_subtree(world: &World, name: &str) -> World {
    let mut gone: BTreeSet<String> = world.graph.descendants_of(name).into_iter().collect();
    gone.insert(name.to_string());
    let doomed: Vec<Triple> = world
        .graph
        .triples()
        .filter(|t| gone.contains(&t.subject) || t.contained_party().is_some_and(|c| gone.contains(c)))
        .cloned()
        .collect();
    let mut out = world.clone();
    for t in &doomed {
        out.graph.remove_triple(t);
    }
    out
}

fn room_for(world: &World, name: &str) -> Result<String, TaskError> {
    world
        .room_of(name)
        .map(str::to_string)
        .ok_or_else(|| TaskError::NothingToRemove(format!("`{name}` outside any room")))
}

#[allow(clippy::too_many_arguments)]
fn environment_example(
    world: &World,
    context: &World,
    room: &str,
    task: TaskKind,
    prompt: String,
    label: String,
    target: &str,
    seed: u64,
    rng: &mut ChaCha8Rng,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let ctx = assemble_context(context, &View::Room(room.to_string()), &prompt, &BTreeSet::new(), cfg, rng)?;
    Ok(Built {
        example: TaskExample {
            task,
            input: ctx.text,
            label,
            seed,
            provenance: Provenance {
                world: world.id.clone(),
                target: Some(target.to_string()),
                ..Default::default()
            },
        },
        trace: ctx.trace,
    })
}

/// Element task: one element of `kind`, chosen uniformly, is removed with
/// everything it holds; its own triples become the label.
pub fn build_element_example(
    world: &World,
    kind: ElementKind,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let placing: Vec<&Triple> = world.graph.triples().filter(|t| kind.places(world, t)).collect();
    let chosen = placing
        .choose(&mut rng)
        .copied()
        .ok_or_else(|| TaskError::NothingToRemove(kind.name().to_string()))?;
    let element = chosen.contained_party().unwrap_or_default().to_string();
    let holder = chosen.container_party().unwrap_or_default().to_string();
    let room = room_for(world, &element)?;
    let label = serialize_triples(&own_triples(world, &element));
    let context = without_subtree(world, &element);
    let prompt = choose_prompt(kind.prompt(), &holder, &mut rng);
    environment_example(world, &context, &room, kind.task(), prompt, label, &element, seed, &mut rng, cfg)
}

/// Free-text attributes asked about by description and persona tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextAttribute {
    CharacterDescription,
    ObjectDescription,
    CharacterPersona,
}

impl TextAttribute {
    pub fn task(self) -> TaskKind {
        match self {
            TextAttribute::CharacterDescription => TaskKind::AddCharacterDescription,
            TextAttribute::ObjectDescription => TaskKind::AddObjectDescription,
            TextAttribute::CharacterPersona => TaskKind::AddCharacterPersona,
        }
    }
}

/// Description or persona task: one matching triple, chosen uniformly, is
/// removed from the context and becomes the label.
pub fn build_text_attribute_example(
    world: &World,
    which: TextAttribute,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (kind, edge, prompt_kind) = match which {
        TextAttribute::CharacterDescription => (NodeKind::Character, EdgeLabel::HasDescription, PromptKind::Description),
        TextAttribute::ObjectDescription => (NodeKind::Object, EdgeLabel::HasDescription, PromptKind::Description),
        TextAttribute::CharacterPersona => (NodeKind::Character, EdgeLabel::HasPersona, PromptKind::Persona),
    };
    let candidates: Vec<&Triple> = world
        .graph
        .triples()
        .filter(|t| t.edge == edge && world.is_kind(&t.subject, kind) && world.room_of(&t.subject).is_some())
        .collect();
    let chosen = candidates
        .choose(&mut rng)
        .map(|t| (*t).clone())
        .ok_or_else(|| TaskError::NothingToRemove(format!("{kind} with {edge}")))?;
    let room = room_for(world, &chosen.subject)?;
    let mut context = world.clone();
    context.graph.remove_triple(&chosen);
    let prompt = choose_prompt(prompt_kind, &chosen.subject, &mut rng);
    environment_example(
        world,
        &context,
        &room,
        which.task(),
        prompt,
        chosen.to_string(),
        &chosen.subject,
        seed,
        &mut rng,
        cfg,
    )
}

/// What an attribute task asks about an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeQuery {
    /// One of the boolean edges, e.g. `IS_CONTAINER`.
    Boolean(EdgeLabel),
    Type,
    /// A `HAS_ATTRIBUTE` value; `None` picks one of the object's uniformly.
    Attribute(Option<String>),
}

impl AttributeQuery {
    /// Every query with a ground-truth answer for `object`.
    pub fn available(world: &World, object: &str) -> Vec<AttributeQuery> {
        let mut out = Vec::new();
        for t in world.graph.triples().filter(|t| t.subject == object) {
            match t.edge {
                EdgeLabel::IsType => out.push(AttributeQuery::Type),
                EdgeLabel::HasAttribute => out.push(AttributeQuery::Attribute(Some(t.value.clone()))),
                e if boolean_prompt(e).is_some() => out.push(AttributeQuery::Boolean(e)),
                _ => {}
            }
        }
        out
    }
}

fn boolean_prompt(edge: EdgeLabel) -> Option<PromptKind> {
    Some(match edge {
        EdgeLabel::IsGettable => PromptKind::Gettable,
        EdgeLabel::IsDrink => PromptKind::Drinkable,
        EdgeLabel::IsFood => PromptKind::Edible,
        EdgeLabel::IsContainer => PromptKind::Container,
        EdgeLabel::IsSurface => PromptKind::Surface,
        EdgeLabel::IsWieldable => PromptKind::Weapon,
        EdgeLabel::IsWearable => PromptKind::Wearable,
        _ => return None,
    })
}

/// Attribute task: the queried triple is removed from the context and
/// becomes the label, e.g. `box IS_CONTAINER true`.
pub fn build_attribute_example(
    world: &World,
    object: &str,
    query: &AttributeQuery,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unknown = |attribute: &str| TaskError::UnknownAttribute {
        object: object.to_string(),
        attribute: attribute.to_string(),
    };
    let (triple, prompt_kind) = match query {
        AttributeQuery::Boolean(edge) => {
            let kind = boolean_prompt(*edge).ok_or_else(|| unknown(edge.as_str()))?;
            let value = world.graph.value_of(object, *edge).ok_or_else(|| unknown(edge.as_str()))?;
            (Triple::new(object, *edge, value), kind)
        }
        AttributeQuery::Type => {
            let value = world
                .graph
                .value_of(object, EdgeLabel::IsType)
                .ok_or_else(|| unknown("IS_TYPE"))?;
            (Triple::new(object, EdgeLabel::IsType, value), PromptKind::Type)
        }
        AttributeQuery::Attribute(wanted) => {
            let values: Vec<&Triple> = world
                .graph
                .with_subject_edge(object, EdgeLabel::HasAttribute)
                .filter(|t| wanted.as_ref().is_none_or(|w| object_key(w) == t.value.to_lowercase()))
                .collect();
            let t = values
                .choose(&mut rng)
                .map(|t| (*t).clone())
                .ok_or_else(|| unknown(wanted.as_deref().unwrap_or("HAS_ATTRIBUTE")))?;
            (t, PromptKind::Attribute)
        }
    };
    let room = room_for(world, object)?;
    let mut context = world.clone();
    context.graph.remove_triple(&triple);
    let prompt = choose_prompt(prompt_kind, object, &mut rng);
    environment_example(
        world,
        &context,
        &room,
        TaskKind::ObjectsAttributes,
        prompt,
        triple.to_string(),
        object,
        seed,
        &mut rng,
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoomTextKind {
    Description,
    Backstory,
}

/// Room task: the room's description or backstory is removed from the
/// context and becomes the label.
pub fn build_room_example(
    world: &World,
    room: &str,
    kind: RoomTextKind,
    seed: u64,
    cfg: &ContextConfig,
) -> Result<Built, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (edge, prompt_kind, task, what) = match kind {
        RoomTextKind::Description => (
            EdgeLabel::HasDescription,
            PromptKind::RoomDescription,
            TaskKind::RoomDescription,
            "description",
        ),
        RoomTextKind::Backstory => (
            EdgeLabel::HasBackstory,
            PromptKind::RoomBackstory,
            TaskKind::RoomBackstory,
            "backstory",
        ),
    };
    let missing = || TaskError::MissingRoomText { room: room.to_string(), kind: what.to_string() };
    if !world.is_kind(room, NodeKind::Room) {
        return Err(missing());
    }
    let text = world.graph.value_of(room, edge).ok_or_else(missing)?.to_string();
    let mut context = world.clone();
    context.graph.remove_triple(&Triple::new(room, edge, &text));
    let prompt = choose_prompt(prompt_kind, room, &mut rng);
    environment_example(world, &context, room, task, prompt, text, room, seed, &mut rng, cfg)
}
