use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EdgeLabel, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Room,
    Character,
    Object,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Room => "room",
            NodeKind::Character => "character",
            NodeKind::Object => "object",
        }
    }

    /// Reads an `IS_TYPE` value. LIGHT calls characters "agent" in places.
    pub fn from_type_value(value: &str) -> Option<NodeKind> {
        match value.trim().to_ascii_lowercase().as_str() {
            "room" => Some(NodeKind::Room),
            "character" | "agent" => Some(NodeKind::Character),
            "object" => Some(NodeKind::Object),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub id: NodeId,
    pub display_name: String,
    pub kind: NodeKind,
}

/// Replaces every line break with a single space; the text formats are line
/// delimited.
pub fn sanitize_value(raw: &str) -> String {
    if !raw.contains(['\n', '\r']) {
        return raw.to_string();
    }
    raw.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

/// One `<subject, EDGE, value>` relationship.
///
/// Ordering is canonical: subject, then edge token, then value, all compared
/// as byte strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub edge: EdgeLabel,
    pub value: String,
}

impl Triple {
    /// Builds a triple, sanitizing line breaks out of subject and value.
    pub fn new(subject: impl AsRef<str>, edge: EdgeLabel, value: impl AsRef<str>) -> Self {
        Triple {
            subject: sanitize_value(subject.as_ref()),
            edge,
            value: sanitize_value(value.as_ref()),
        }
    }

    pub fn boolean(subject: impl AsRef<str>, edge: EdgeLabel, value: bool) -> Self {
        Triple::new(subject, edge, if value { "true" } else { "false" })
    }

    /// Checks the per-triple invariants.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.subject.trim().is_empty() || self.value.trim().is_empty() {
            return Err(GraphError::MalformedTriple(self.to_string()));
        }
        if self.subject.contains(['\n', '\r']) || self.value.contains(['\n', '\r']) {
            return Err(GraphError::MalformedTriple(self.to_string()));
        }
        if self.edge.is_boolean() && self.value != "true" && self.value != "false" {
            return Err(GraphError::NonBooleanValue {
                edge: self.edge,
                value: self.value.clone(),
            });
        }
        Ok(())
    }

    /// The entity this triple places somewhere, for location edges.
    pub fn contained_party(&self) -> Option<&str> {
        match self.edge {
            EdgeLabel::IsInside => Some(&self.subject),
            e if e.is_carrier() => Some(&self.value),
            _ => None,
        }
    }

    /// The holder (container, room, or carrying character), for location edges.
    pub fn container_party(&self) -> Option<&str> {
        match self.edge {
            EdgeLabel::IsInside => Some(&self.value),
            e if e.is_carrier() => Some(&self.subject),
            _ => None,
        }
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> Ordering {
        self.subject
            .cmp(&other.subject)
            .then_with(|| self.edge.as_str().cmp(other.edge.as_str()))
            .then_with(|| self.value.cmp(&other.value))
    }
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.edge, self.value)
    }
}
