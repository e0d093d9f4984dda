//! Grounded multi-object interactions ("use x with y"): records, simulation
//! against a world, and train/held-out splitting.

mod simulate;
mod splits;

pub use simulate::{apply_use_event, attribute_edge, instantiate, UseOutcome};
pub use splits::{held_out_size, make_splits, split_indices, SplitIndices, Splits};

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::GraphError;

pub const ACTOR_PLACEHOLDER: &str = "{actor}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UseEventError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("bad attribute change `{0}`; expected +name or -name")]
    BadAttributeSyntax(String),
    #[error("unresolvable location `{0}`")]
    UnresolvableLocation(String),
    #[error("external narration lacks the {{actor}} placeholder")]
    MissingPlaceholder,
    #[error("unknown event kind `{0}`")]
    UnknownKind(String),
    #[error("{0} events cannot have final objects")]
    UnexpectedFinalState(EventKind),
    #[error("success event has no final objects")]
    EmptySuccess,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("`{0}` is not a character in a room")]
    UnknownActor(String),
    #[error("inconsistent final state: {0}")]
    InconsistentFinalState(String),
    #[error("corpus of {0} events is too small to split")]
    CorpusTooSmall(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Success,
    Boring,
    Failed,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Success => "success",
            EventKind::Boring => "boring",
            EventKind::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self, UseEventError> {
        match s.trim().to_lowercase().as_str() {
            "success" => Ok(EventKind::Success),
            "boring" => Ok(EventKind::Boring),
            "failed" => Ok(EventKind::Failed),
            _ => Err(UseEventError::UnknownKind(s.to_string())),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub description: String,
    /// Lowercase attribute names.
    pub required_attributes: Vec<String>,
    /// Whether the actor starts out holding the object; `None` uses the
    /// role default (primary held, secondary in the room).
    pub held: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeSign {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub sign: ChangeSign,
    /// Lowercase.
    pub attribute: String,
}

impl AttributeChange {
    /// Parses `+name` or `-name`; the sign must be directly followed by the name.
    pub fn parse(s: &str) -> Result<Self, UseEventError> {
        let t = s.trim();
        let bad = || UseEventError::BadAttributeSyntax(s.to_string());
        let (sign, rest) = match t.chars().next() {
            Some('+') => (ChangeSign::Add, &t[1..]),
            Some('-') => (ChangeSign::Remove, &t[1..]),
            _ => return Err(bad()),
        };
        if rest.is_empty() || rest.starts_with(char::is_whitespace) || rest.starts_with(['+', '-']) {
            return Err(bad());
        }
        Ok(AttributeChange {
            sign,
            attribute: rest.to_lowercase(),
        })
    }
}

impl fmt::Display for AttributeChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            ChangeSign::Add => '+',
            ChangeSign::Remove => '-',
        };
        write!(f, "{s}{}", self.attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationSpec {
    InRoom,
    HeldByActor,
    WornByActor,
    InsideObject(String),
    OnObject(String),
    OriginalLocationOf(String),
}

impl LocationSpec {
    /// Normalizes a location phrase. Object references must name one of
    /// `known` (compared case-insensitively).
    pub fn parse(s: &str, known: &[&str]) -> Result<Self, UseEventError> {
        let lower = s.trim().to_lowercase();
        let unresolvable = || UseEventError::UnresolvableLocation(s.to_string());
        match lower.as_str() {
            "in room" | "in the room" => return Ok(LocationSpec::InRoom),
            "held by {actor}" | "carried by {actor}" => return Ok(LocationSpec::HeldByActor),
            "worn by {actor}" => return Ok(LocationSpec::WornByActor),
            _ => {}
        }
        let resolve = |rest: &str| -> Result<String, UseEventError> {
            let rest = rest.trim();
            let rest = rest.strip_prefix("the ").unwrap_or(rest);
            known
                .iter()
                .find(|k| k.to_lowercase() == rest)
                .map(|k| k.to_string())
                .ok_or_else(unresolvable)
        };
        if let Some(rest) = lower.strip_prefix("original location of ") {
            return Ok(LocationSpec::OriginalLocationOf(resolve(rest)?));
        }
        if let Some(rest) = lower.strip_prefix("in ") {
            return Ok(LocationSpec::InsideObject(resolve(rest)?));
        }
        if let Some(rest) = lower.strip_prefix("on ") {
            return Ok(LocationSpec::OnObject(resolve(rest)?));
        }
        Err(unresolvable())
    }

    pub fn render(&self) -> String {
        match self {
            LocationSpec::InRoom => "In room".to_string(),
            LocationSpec::HeldByActor => "Held by {actor}".to_string(),
            LocationSpec::WornByActor => "Worn by {actor}".to_string(),
            LocationSpec::InsideObject(n) => format!("in {n}"),
            LocationSpec::OnObject(n) => format!("on {n}"),
            LocationSpec::OriginalLocationOf(n) => format!("original location of {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalObjectState {
    pub name: String,
    pub description: String,
    pub location: LocationSpec,
    pub attribute_changes: Vec<AttributeChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseEvent {
    pub phrase: String,
    pub narration: String,
    pub alternate: Option<String>,
    pub external_template: String,
    pub initial_primary: ObjectSpec,
    pub initial_secondary: ObjectSpec,
    pub final_objects: Vec<FinalObjectState>,
    pub kind: EventKind,
}

/// Normalized object key: trimmed and lowercased.
pub fn object_key(name: &str) -> String {
    name.trim().to_lowercase()
}

impl UseEvent {
    pub fn initial_objects(&self) -> [&ObjectSpec; 2] {
        [&self.initial_primary, &self.initial_secondary]
    }

    /// Normalized names of the two interacting objects.
    pub fn object_keys(&self) -> [String; 2] {
        [
            object_key(&self.initial_primary.name),
            object_key(&self.initial_secondary.name),
        ]
    }

    pub fn is_no_op(&self) -> bool {
        self.kind != EventKind::Success
    }

    pub fn to_record(&self) -> UseEventRecord {
        let spec = |o: &ObjectSpec| ObjectRecord {
            name: Some(o.name.clone()),
            description: Some(o.description.clone()),
            attributes: o.required_attributes.clone(),
            held: o.held,
        };
        UseEventRecord {
            phrase: Some(self.phrase.clone()),
            narration: Some(self.narration.clone()),
            alternate: self.alternate.clone(),
            external: Some(self.external_template.clone()),
            kind: Some(self.kind.as_str().to_string()),
            initial_primary: Some(spec(&self.initial_primary)),
            initial_secondary: Some(spec(&self.initial_secondary)),
            final_objects: self
                .final_objects
                .iter()
                .map(|f| FinalRecord {
                    name: Some(f.name.clone()),
                    description: Some(f.description.clone()),
                    location: Some(f.location.render()),
                    attribute_changes: f.attribute_changes.iter().map(ToString::to_string).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("records always serialize")
    }
}

/// Wire form of one corpus line. Every field is optional here so that a
/// missing one is reported by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseEventRecord {
    pub phrase: Option<String>,
    pub narration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate: Option<String>,
    pub external: Option<String>,
    pub kind: Option<String>,
    pub initial_primary: Option<ObjectRecord>,
    pub initial_secondary: Option<ObjectRecord>,
    #[serde(default)]
    pub final_objects: Vec<FinalRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub name: Option<String>,
    pub description: Option<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub name: Option<String>,
    pub description: Option<String>,
    pub location: Option<String>,
    #[serde(default)]
    pub attribute_changes: Vec<String>,
}

fn required<T: Clone>(v: &Option<T>, field: &str) -> Result<T, UseEventError> {
    v.clone().ok_or_else(|| UseEventError::MissingField(field.to_string()))
}

fn nonempty(v: &Option<String>, field: &str) -> Result<String, UseEventError> {
    let s = required(v, field)?;
    if s.trim().is_empty() {
        return Err(UseEventError::MissingField(field.to_string()));
    }
    Ok(s)
}

fn object_spec(r: &Option<ObjectRecord>, field: &str) -> Result<ObjectSpec, UseEventError> {
    let r = required(r, field)?;
    Ok(ObjectSpec {
        name: nonempty(&r.name, &format!("{field}.name"))?,
        description: required(&r.description, &format!("{field}.description"))?,
        required_attributes: r
            .attributes
            .iter()
            .map(|a| a.trim().to_lowercase())
            .filter(|a| !a.is_empty())
            .collect(),
        held: r.held,
    })
}

/// Validates a record and normalizes its attribute and location strings.
/// An alternate of `N/A` or blank means none.
pub fn parse_use_event(record: &UseEventRecord) -> Result<UseEvent, UseEventError> {
    let external = nonempty(&record.external, "external")?;
    if !external.contains(ACTOR_PLACEHOLDER) {
        return Err(UseEventError::MissingPlaceholder);
    }
    let kind = EventKind::parse(&required(&record.kind, "kind")?)?;
    let primary = object_spec(&record.initial_primary, "initial_primary")?;
    let secondary = object_spec(&record.initial_secondary, "initial_secondary")?;

    let final_names: Vec<String> = record
        .final_objects
        .iter()
        .enumerate()
        .map(|(i, f)| nonempty(&f.name, &format!("final_objects[{i}].name")))
        .collect::<Result<_, _>>()?;
    let mut known: Vec<&str> = vec![&primary.name, &secondary.name];
    known.extend(final_names.iter().map(String::as_str));

    let mut final_objects = Vec::new();
    for (i, (f, name)) in record.final_objects.iter().zip(&final_names).enumerate() {
        let location = nonempty(&f.location, &format!("final_objects[{i}].location"))?;
        final_objects.push(FinalObjectState {
            name: name.clone(),
            description: required(&f.description, &format!("final_objects[{i}].description"))?,
            location: LocationSpec::parse(&location, &known)?,
            attribute_changes: f
                .attribute_changes
                .iter()
                .map(|c| AttributeChange::parse(c))
                .collect::<Result<_, _>>()?,
        });
    }
    match kind {
        EventKind::Success if final_objects.is_empty() => return Err(UseEventError::EmptySuccess),
        EventKind::Boring | EventKind::Failed if !final_objects.is_empty() => {
            return Err(UseEventError::UnexpectedFinalState(kind))
        }
        _ => {}
    }
    let alternate = record
        .alternate
        .clone()
        .filter(|a| !a.trim().is_empty() && a.trim() != "N/A");

    Ok(UseEvent {
        phrase: nonempty(&record.phrase, "phrase")?,
        narration: nonempty(&record.narration, "narration")?,
        alternate,
        external_template: external,
        initial_primary: primary,
        initial_secondary: secondary,
        final_objects,
        kind,
    })
}

pub fn parse_use_event_json(line: &str) -> Result<UseEvent, UseEventError> {
    let record: UseEventRecord =
        serde_json::from_str(line).map_err(|e| UseEventError::Malformed(e.to_string()))?;
    parse_use_event(&record)
}

/// Replaces every `{actor}` in the template with `actor`, in a single pass.
pub fn render_external(event: &UseEvent, actor: &str) -> String {
    event.external_template.replace(ACTOR_PLACEHOLDER, actor)
}

/// Reads a JSONL corpus, skipping blank lines.
pub fn read_use_events(reader: impl BufRead) -> Result<Vec<UseEvent>, UseEventError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| UseEventError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_use_event_json(&line).map_err(|e| match e {
            UseEventError::Malformed(m) => UseEventError::Malformed(format!("line {}: {m}", i + 1)),
            other => other,
        })?);
    }
    Ok(out)
}

pub fn load_use_events(path: &Path) -> Result<Vec<UseEvent>, UseEventError> {
    let f = std::fs::File::open(path)
        .map_err(|e| UseEventError::Io(format!("{}: {e}", path.display())))?;
    read_use_events(std::io::BufReader::new(f))
}

pub fn write_use_events(mut w: impl Write, events: &[UseEvent]) -> Result<(), UseEventError> {
    for e in events {
        writeln!(w, "{}", e.to_json_line()).map_err(|e| UseEventError::Io(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_change_syntax() {
        let c = AttributeChange::parse("+Wearable").unwrap();
        assert_eq!(c.sign, ChangeSign::Add);
        assert_eq!(c.attribute, "wearable");
        assert_eq!(AttributeChange::parse(" -calm ").unwrap().to_string(), "-calm");
        for bad in ["wearable", "+", "+ x", "", "++x"] {
            assert!(AttributeChange::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn location_phrases() {
        let known = ["rope", "Casting Net"];
        assert_eq!(LocationSpec::parse("Worn by {Actor}", &known).unwrap(), LocationSpec::WornByActor);
        assert_eq!(LocationSpec::parse("In room", &known).unwrap(), LocationSpec::InRoom);
        assert_eq!(
            LocationSpec::parse("in casting net", &known).unwrap(),
            LocationSpec::InsideObject("Casting Net".into())
        );
        assert_eq!(
            LocationSpec::parse("Original location of rope", &known).unwrap(),
            LocationSpec::OriginalLocationOf("rope".into())
        );
        assert!(matches!(
            LocationSpec::parse("in the void", &known),
            Err(UseEventError::UnresolvableLocation(_))
        ));
    }
}
