use std::fmt;

use serde::{Deserialize, Serialize};

use super::action::{CanonicalAction, Verb};
use super::rules::Validity;
use super::World;
use crate::graph::{EdgeLabel, NodeKind};

fn object_phrase(action: &CanonicalAction) -> String {
    let p = action.primary_name();
    let s = action.secondary_name();
    match action.verb {
        Verb::Say => String::new(),
        Verb::Put => format!("the {p} in the {s}"),
        Verb::Give => format!("the {p} to the {s}"),
        Verb::Steal => format!("the {p} from the {s}"),
        Verb::Use => format!("the {p} with the {s}"),
        Verb::Go => format!("to the {p}"),
        Verb::Get if action.secondary.is_some() => format!("the {p} from the {s}"),
        Verb::Hit if action.secondary.is_some() => format!("the {p} with the {s}"),
        _ => format!("the {p}"),
    }
}

/// Second-person narration for the actor.
pub fn templated_narration(action: &CanonicalAction, validity: &Validity) -> String {
    match (validity, action.verb) {
        (Validity::Valid, Verb::Say) => action.raw_text.clone(),
        (Validity::Valid, v) => format!("You {} {}.", v.base(), object_phrase(action)),
        (Validity::Invalid(_), Verb::Go) => "You can't go there!".to_string(),
        (Validity::Invalid(_), v) => format!("You can't {} that!", v.base()),
    }
}

/// Third-person narration of a valid action, as seen by other characters.
pub fn observer_narration(action: &CanonicalAction, actor: &str) -> String {
    match action.verb {
        Verb::Say => format!("{actor} says \"{}\"", action.raw_text),
        v => format!("{actor} {} {}.", v.third_person(), object_phrase(action)),
    }
}

pub(crate) fn narration_for(
    action: &CanonicalAction,
    actor: &str,
    observer: &str,
    validity: &Validity,
) -> String {
    if observer == actor {
        match action.verb {
            Verb::Say => format!("You say \"{}\"", action.raw_text),
            _ => templated_narration(action, validity),
        }
    } else {
        observer_narration(action, actor)
    }
}

/// The lossy text view of a room, for one character or for no one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameText {
    pub viewpoint: Option<String>,
    pub text: String,
}

impl fmt::Display for GameText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn the_list(names: &[String]) -> String {
    names
        .iter()
        .map(|n| format!("the {n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Items held by `who` through `edge`, sorted.
fn held(world: &World, who: &str, edge: EdgeLabel) -> Vec<String> {
    let mut v: Vec<String> = world
        .graph
        .children_of(who)
        .into_iter()
        .filter(|t| t.edge == edge)
        .map(|t| t.value.clone())
        .collect();
    v.sort();
    v
}

/// Objects placed directly in the room; nested contents stay hidden.
fn room_objects(world: &World, room: &str) -> Vec<String> {
    let mut v: Vec<String> = world
        .graph
        .children_of(room)
        .into_iter()
        .filter(|t| t.edge == EdgeLabel::IsInside && world.is_kind(&t.subject, NodeKind::Object))
        .map(|t| t.subject.clone())
        .collect();
    v.sort();
    v
}

const CARRIER_VERBS: [(EdgeLabel, &str); 3] = [
    (EdgeLabel::IsCarrying, "carrying"),
    (EdgeLabel::IsWearing, "wearing"),
    (EdgeLabel::IsWielding, "wielding"),
];

fn push_holdings(lines: &mut Vec<String>, world: &World, who: &str, subject: &str) {
    for (edge, verb) in CARRIER_VERBS {
        let items = held(world, who, edge);
        if !items.is_empty() {
            lines.push(format!("{subject} {verb}: {}.", the_list(&items)));
        }
    }
}

fn room_header(lines: &mut Vec<String>, world: &World, room: &str) {
    if let Some(d) = world.graph.value_of(room, EdgeLabel::HasDescription) {
        lines.push(d.to_string());
    }
    let objects = room_objects(world, room);
    if !objects.is_empty() {
        lines.push(format!("You see: {}.", the_list(&objects)));
    }
}

/// Renders what `viewpoint` perceives: room, description, directly placed
/// objects, other characters and what they visibly hold, the viewpoint's own
/// possessions and persona, and its most recent observations. Attributes,
/// container contents, and other characters' personas are omitted.
pub fn render_game_text(world: &World, viewpoint: &str) -> GameText {
    let mut lines = Vec::new();
    let Some(room) = world.room_of(viewpoint).map(str::to_string) else {
        return GameText {
            viewpoint: Some(viewpoint.to_string()),
            text: format!("You are the {viewpoint}, nowhere at all."),
        };
    };
    lines.push(format!("You are the {viewpoint}, in the {room}."));
    room_header(&mut lines, world, &room);
    let others: Vec<String> = world
        .characters_in(&room)
        .into_iter()
        .filter(|c| c != viewpoint)
        .collect();
    if !others.is_empty() {
        lines.push(format!("Also here: {}.", the_list(&others)));
    }
    push_holdings(&mut lines, world, viewpoint, "You are");
    for o in &others {
        push_holdings(&mut lines, world, o, &format!("The {o} is"));
        if world.is_dead(o) {
            lines.push(format!("The {o} is dead."));
        }
    }
    if let Some(p) = world.graph.value_of(viewpoint, EdgeLabel::HasPersona) {
        lines.push(format!("Your persona: {p}"));
    }
    let observed: Vec<&str> = world
        .graph
        .history()
        .iter()
        .filter(|t| t.edge == EdgeLabel::Observed && t.subject == viewpoint)
        .map(|t| t.value.as_str())
        .collect();
    let recent = &observed[observed.len().saturating_sub(world.history_window)..];
    if !recent.is_empty() {
        lines.push("Recent events:".to_string());
        lines.extend(recent.iter().map(|s| s.to_string()));
    }
    GameText {
        viewpoint: Some(viewpoint.to_string()),
        text: lines.join("\n"),
    }
}

/// Viewpoint-free rendering of a room, used where no character perceives it.
pub fn render_room_view(world: &World, room: &str) -> GameText {
    let mut lines = vec![format!("You are in the {room}.")];
    room_header(&mut lines, world, room);
    let chars = world.characters_in(room);
    if !chars.is_empty() {
        lines.push(format!("Characters here: {}.", the_list(&chars)));
    }
    for c in &chars {
        push_holdings(&mut lines, world, c, &format!("The {c} is"));
    }
    GameText {
        viewpoint: None,
        text: lines.join("\n"),
    }
}
