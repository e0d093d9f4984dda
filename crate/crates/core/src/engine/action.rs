use std::fmt;

use serde::{Deserialize, Serialize};

use super::World;
use crate::graph::{NodeKind, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verb {
    Get,
    Drop,
    Put,
    Give,
    Steal,
    Wear,
    Remove,
    Wield,
    Eat,
    Drink,
    Follow,
    Hit,
    Hug,
    Go,
    Say,
    Use,
}

impl Verb {
    pub const ALL: [Verb; 16] = [
        Verb::Get,
        Verb::Drop,
        Verb::Put,
        Verb::Give,
        Verb::Steal,
        Verb::Wear,
        Verb::Remove,
        Verb::Wield,
        Verb::Eat,
        Verb::Drink,
        Verb::Follow,
        Verb::Hit,
        Verb::Hug,
        Verb::Go,
        Verb::Say,
        Verb::Use,
    ];

    /// Base form used in canonical action text.
    pub fn base(self) -> &'static str {
        match self {
            Verb::Get => "get",
            Verb::Drop => "drop",
            Verb::Put => "put",
            Verb::Give => "give",
            Verb::Steal => "steal",
            Verb::Wear => "wear",
            Verb::Remove => "remove",
            Verb::Wield => "wield",
            Verb::Eat => "eat",
            Verb::Drink => "drink",
            Verb::Follow => "follow",
            Verb::Hit => "hit",
            Verb::Hug => "hug",
            Verb::Go => "go",
            Verb::Say => "say",
            Verb::Use => "use",
        }
    }

    /// Third-person singular, for narrations seen by other characters.
    pub fn third_person(self) -> &'static str {
        match self {
            Verb::Get => "gets",
            Verb::Drop => "drops",
            Verb::Put => "puts",
            Verb::Give => "gives",
            Verb::Steal => "steals",
            Verb::Wear => "wears",
            Verb::Remove => "removes",
            Verb::Wield => "wields",
            Verb::Eat => "eats",
            Verb::Drink => "drinks",
            Verb::Follow => "follows",
            Verb::Hit => "hits",
            Verb::Hug => "hugs",
            Verb::Go => "goes",
            Verb::Say => "says",
            Verb::Use => "uses",
        }
    }

    /// Verbs whose targets are characters rather than objects.
    pub fn targets_character(self) -> bool {
        matches!(self, Verb::Follow | Verb::Hit | Verb::Hug)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base())
    }
}

/// Verb phrases, including synonyms, longest first within each verb.
const LEXICON: &[(&str, Verb)] = &[
    ("pick up", Verb::Get),
    ("get", Verb::Get),
    ("take", Verb::Get),
    ("grab", Verb::Get),
    ("drop", Verb::Drop),
    ("put down", Verb::Drop),
    ("put", Verb::Put),
    ("place", Verb::Put),
    ("give", Verb::Give),
    ("hand", Verb::Give),
    ("steal", Verb::Steal),
    ("wear", Verb::Wear),
    ("put on", Verb::Wear),
    ("take off", Verb::Remove),
    ("remove", Verb::Remove),
    ("unwield", Verb::Remove),
    ("wield", Verb::Wield),
    ("eat", Verb::Eat),
    ("consume", Verb::Eat),
    ("drink", Verb::Drink),
    ("sip", Verb::Drink),
    ("follow", Verb::Follow),
    ("swing at", Verb::Hit),
    ("hit", Verb::Hit),
    ("attack", Verb::Hit),
    ("strike", Verb::Hit),
    ("punch", Verb::Hit),
    ("hug", Verb::Hug),
    ("embrace", Verb::Hug),
    ("go to", Verb::Go),
    ("go", Verb::Go),
    ("walk to", Verb::Go),
    ("enter", Verb::Go),
    ("say", Verb::Say),
    ("use", Verb::Use),
];

const PREPOSITIONS: &[&str] = &[
    "with", "using", "to", "on", "onto", "in", "into", "inside", "from", "at", "around", "over",
    "under",
];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "some", "my", "your", "his", "her", "their", "its", "this", "that",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalAction {
    pub verb: Verb,
    pub primary: Option<NodeRef>,
    pub secondary: Option<NodeRef>,
    /// The text as entered; for `Say` this is the utterance itself.
    pub raw_text: String,
}

impl CanonicalAction {
    pub fn new(verb: Verb, primary: Option<NodeRef>, secondary: Option<NodeRef>) -> Self {
        let mut a = CanonicalAction {
            verb,
            primary,
            secondary,
            raw_text: String::new(),
        };
        a.raw_text = a.text();
        a
    }

    pub fn say(utterance: impl Into<String>) -> Self {
        CanonicalAction {
            verb: Verb::Say,
            primary: None,
            secondary: None,
            raw_text: utterance.into(),
        }
    }

    pub fn primary_name(&self) -> &str {
        self.primary.as_ref().map(|n| n.display_name.as_str()).unwrap_or("")
    }

    pub fn secondary_name(&self) -> &str {
        self.secondary.as_ref().map(|n| n.display_name.as_str()).unwrap_or("")
    }

    /// Canonical text, e.g. `get staff`, `give coin to peasant`.
    pub fn text(&self) -> String {
        let p = self.primary_name();
        let s = self.secondary_name();
        match self.verb {
            Verb::Say => format!("say {}", self.raw_text),
            Verb::Put => format!("put {p} in {s}"),
            Verb::Give => format!("give {p} to {s}"),
            Verb::Steal => format!("steal {p} from {s}"),
            Verb::Use => format!("use {p} with {s}"),
            Verb::Hit if self.secondary.is_some() => format!("hit {p} with {s}"),
            v => format!("{} {p}", v.base()),
        }
    }
}

impl fmt::Display for CanonicalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("nothing called `{0}` is here")]
    UnknownTarget(String),
    #[error("could not understand `{0}`")]
    Unparseable(String),
    /// A recognizable target with a verb outside the lexicon.
    #[error("unknown verb `{verb}`")]
    UnknownVerb { verb: String, target: String },
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| matches!(c, '.' | '!' | '?' | ',' | ';' | '"' | '\''))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn strip_determiners(tokens: &[String]) -> &[String] {
    let mut t = tokens;
    while let Some((first, rest)) = t.split_first() {
        if DETERMINERS.contains(&first.as_str()) {
            t = rest;
        } else {
            break;
        }
    }
    t
}

fn token_match(p: &str, n: &str) -> bool {
    p == n || (p.len() >= 3 && n.len() >= 3 && (n.starts_with(p) || p.starts_with(n)))
}

/// How well a phrase names a candidate; lower is better. Every phrase token
/// must match a name token, in order (exact or shared prefix).
fn match_score(phrase: &[String], name: &str) -> Option<(u8, usize)> {
    let name_tokens = words(name);
    if phrase.is_empty() || name_tokens.is_empty() {
        return None;
    }
    if phrase == name_tokens.as_slice() {
        return Some((0, 0));
    }
    let mut idx = 0;
    for p in phrase {
        loop {
            if idx >= name_tokens.len() {
                return None;
            }
            let hit = token_match(p, &name_tokens[idx]);
            idx += 1;
            if hit {
                break;
            }
        }
    }
    Some((1, name_tokens.len().saturating_sub(phrase.len())))
}

/// Resolves a noun phrase against candidate display names. Exact matches win,
/// then the candidate needing the fewest extra words, then name order.
pub fn resolve_target<'a>(phrase: &[String], candidates: &'a [String]) -> Option<&'a str> {
    let phrase = strip_determiners(phrase);
    candidates
        .iter()
        .filter_map(|c| match_score(phrase, c).map(|s| (s, c)))
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, c)| c.as_str())
}

fn match_verb(tokens: &[String]) -> Option<(Verb, usize)> {
    LEXICON
        .iter()
        .filter_map(|(phrase, verb)| {
            let pw: Vec<&str> = phrase.split(' ').collect();
            (tokens.len() >= pw.len() && tokens.iter().zip(&pw).all(|(t, p)| t == p))
                .then_some((*verb, pw.len()))
        })
        .max_by_key(|(_, n)| *n)
}

struct Split<'a> {
    first: &'a str,
    second: &'a str,
    preposition: &'a str,
}

/// Tries every preposition position; returns the first where both sides resolve.
fn split_two<'a>(rest: &'a [String], candidates: &'a [String]) -> Option<Split<'a>> {
    for (i, tok) in rest.iter().enumerate() {
        if i == 0 || i + 1 >= rest.len() || !PREPOSITIONS.contains(&tok.as_str()) {
            continue;
        }
        if let (Some(first), Some(second)) = (
            resolve_target(&rest[..i], candidates),
            resolve_target(&rest[i + 1..], candidates),
        ) {
            if first != second {
                return Some(Split {
                    first,
                    second,
                    preposition: tok,
                });
            }
        }
    }
    None
}

fn node(world: &World, name: &str) -> Option<NodeRef> {
    world.node(name).cloned()
}

/// Parses free text into a canonical action for `actor`.
///
/// Grammar: `<verb> <object> [<preposition> <object>]`. Verbs match the
/// lexicon case-insensitively (longest phrase first). Targets resolve
/// against names visible to the actor. A phrase with an unknown verb but two
/// resolvable objects becomes `Use`; the object after `with`/`using` is the
/// primary (the tool), otherwise the first-mentioned one is.
pub fn parse_action(text: &str, world: &World, actor: &str) -> Result<CanonicalAction, ParseError> {
    let trimmed = text.trim();
    let tokens = words(trimmed);
    if tokens.is_empty() {
        return Err(ParseError::Unparseable(text.to_string()));
    }
    if tokens[0] == "say" {
        let utterance = trimmed[3..].trim().trim_matches('"').trim();
        if utterance.is_empty() {
            return Err(ParseError::Unparseable(text.to_string()));
        }
        return Ok(CanonicalAction::say(utterance));
    }

    let candidates: Vec<String> = world
        .visible_names(actor)
        .into_iter()
        .filter(|n| n != actor)
        .collect();
    let rooms: Vec<String> = candidates
        .iter()
        .filter(|n| world.is_kind(n, NodeKind::Room))
        .cloned()
        .collect();
    let things: Vec<String> = candidates
        .iter()
        .filter(|n| !world.is_kind(n, NodeKind::Room))
        .cloned()
        .collect();

    if let Some((verb, used)) = match_verb(&tokens) {
        let rest = &tokens[used..];
        if rest.is_empty() {
            return Err(ParseError::Unparseable(text.to_string()));
        }
        let phrase = || rest.join(" ");
        let mut action = match verb {
            Verb::Go => {
                let room = resolve_target(rest, &rooms)
                    .ok_or_else(|| ParseError::UnknownTarget(phrase()))?;
                CanonicalAction::new(verb, node(world, room), None)
            }
            Verb::Put | Verb::Give | Verb::Steal | Verb::Use => {
                let split = split_two(rest, &things).ok_or_else(|| {
                    if resolve_target(rest, &things).is_some() {
                        ParseError::Unparseable(text.to_string())
                    } else {
                        ParseError::UnknownTarget(phrase())
                    }
                })?;
                CanonicalAction::new(verb, node(world, split.first), node(world, split.second))
            }
            _ => {
                if let Some(target) = resolve_target(rest, &things) {
                    CanonicalAction::new(verb, node(world, target), None)
                } else if let Some(split) = split_two(rest, &things) {
                    CanonicalAction::new(verb, node(world, split.first), node(world, split.second))
                } else {
                    return Err(ParseError::UnknownTarget(phrase()));
                }
            }
        };
        action.raw_text = trimmed.to_string();
        return Ok(action);
    }

    // Unknown verb: shortest verb prefix that leaves resolvable objects.
    for k in 1..tokens.len() {
        let rest = &tokens[k..];
        if let Some(split) = split_two(rest, &things) {
            let (primary, secondary) = if matches!(split.preposition, "with" | "using") {
                (split.second, split.first)
            } else {
                (split.first, split.second)
            };
            let mut action =
                CanonicalAction::new(Verb::Use, node(world, primary), node(world, secondary));
            action.raw_text = trimmed.to_string();
            return Ok(action);
        }
    }
    for k in 1..tokens.len() {
        if let Some(target) = resolve_target(&tokens[k..], &things) {
            return Err(ParseError::UnknownVerb {
                verb: tokens[..k].join(" "),
                target: target.to_string(),
            });
        }
    }
    Err(ParseError::Unparseable(text.to_string()))
}
