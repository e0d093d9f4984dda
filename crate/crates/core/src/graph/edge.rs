use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GraphError;

/// Relationship label of a triple. The set is closed; the textual form is the
/// uppercase underscore token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    IsType,
    IsInside,
    IsCarrying,
    IsWielding,
    IsWearing,
    HasBackstory,
    HasPersona,
    HasDescription,
    IsDead,
    HasDamageLevel,
    HasHealthLevel,
    HasStrengthLevel,
    HasPlayerContext,
    HasAttribute,
    IsGettable,
    IsDrink,
    IsFood,
    IsContainer,
    IsSurface,
    IsWearable,
    IsWieldable,
    HadSaid,
    HadActed,
    Observed,
    Contains,
    CurrentPlayer,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 26] = [
        EdgeLabel::IsType,
        EdgeLabel::IsInside,
        EdgeLabel::IsCarrying,
        EdgeLabel::IsWielding,
        EdgeLabel::IsWearing,
        EdgeLabel::HasBackstory,
        EdgeLabel::HasPersona,
        EdgeLabel::HasDescription,
        EdgeLabel::IsDead,
        EdgeLabel::HasDamageLevel,
        EdgeLabel::HasHealthLevel,
        EdgeLabel::HasStrengthLevel,
        EdgeLabel::HasPlayerContext,
        EdgeLabel::HasAttribute,
        EdgeLabel::IsGettable,
        EdgeLabel::IsDrink,
        EdgeLabel::IsFood,
        EdgeLabel::IsContainer,
        EdgeLabel::IsSurface,
        EdgeLabel::IsWearable,
        EdgeLabel::IsWieldable,
        EdgeLabel::HadSaid,
        EdgeLabel::HadActed,
        EdgeLabel::Observed,
        EdgeLabel::Contains,
        EdgeLabel::CurrentPlayer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::IsType => "IS_TYPE",
            EdgeLabel::IsInside => "IS_INSIDE",
            EdgeLabel::IsCarrying => "IS_CARRYING",
            EdgeLabel::IsWielding => "IS_WIELDING",
            EdgeLabel::IsWearing => "IS_WEARING",
            EdgeLabel::HasBackstory => "HAS_BACKSTORY",
            EdgeLabel::HasPersona => "HAS_PERSONA",
            EdgeLabel::HasDescription => "HAS_DESCRIPTION",
            EdgeLabel::IsDead => "IS_DEAD",
            EdgeLabel::HasDamageLevel => "HAS_DAMAGE_LEVEL",
            EdgeLabel::HasHealthLevel => "HAS_HEALTH_LEVEL",
            EdgeLabel::HasStrengthLevel => "HAS_STRENGTH_LEVEL",
            EdgeLabel::HasPlayerContext => "HAS_PLAYER_CONTEXT",
            EdgeLabel::HasAttribute => "HAS_ATTRIBUTE",
            EdgeLabel::IsGettable => "IS_GETTABLE",
            EdgeLabel::IsDrink => "IS_DRINK",
            EdgeLabel::IsFood => "IS_FOOD",
            EdgeLabel::IsContainer => "IS_CONTAINER",
            EdgeLabel::IsSurface => "IS_SURFACE",
            EdgeLabel::IsWearable => "IS_WEARABLE",
            EdgeLabel::IsWieldable => "IS_WIELDABLE",
            EdgeLabel::HadSaid => "HAD_SAID",
            EdgeLabel::HadActed => "HAD_ACTED",
            EdgeLabel::Observed => "OBSERVED",
            EdgeLabel::Contains => "CONTAINS",
            EdgeLabel::CurrentPlayer => "CURRENT_PLAYER",
        }
    }

    /// Edges whose value must be the literal `true` or `false`.
    pub fn is_boolean(self) -> bool {
        matches!(
            self,
            EdgeLabel::IsGettable
                | EdgeLabel::IsDrink
                | EdgeLabel::IsFood
                | EdgeLabel::IsContainer
                | EdgeLabel::IsSurface
                | EdgeLabel::IsWearable
                | EdgeLabel::IsWieldable
                | EdgeLabel::IsDead
        )
    }

    /// Append-only history edges; never part of the state triple set.
    pub fn is_history(self) -> bool {
        matches!(self, EdgeLabel::HadSaid | EdgeLabel::HadActed | EdgeLabel::Observed)
    }

    /// Edges where the subject holds the value (the value is the contained party).
    pub fn is_carrier(self) -> bool {
        matches!(self, EdgeLabel::IsCarrying | EdgeLabel::IsWielding | EdgeLabel::IsWearing)
    }

    /// Edges that place an entity somewhere: `IS_INSIDE` plus the carrier edges.
    pub fn is_location(self) -> bool {
        self == EdgeLabel::IsInside || self.is_carrier()
    }

    pub fn is_edge_token(token: &str) -> bool {
        token.parse::<EdgeLabel>().is_ok()
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeLabel {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeLabel::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| GraphError::UnknownEdge(s.to_string()))
    }
}

impl Serialize for EdgeLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EdgeLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
