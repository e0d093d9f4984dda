use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::graph::{infer_kinds, EdgeLabel, NodeKind, Triple};

/// Dropout classes. Entity classes (`RoomObjects` through `CarriedObjects`)
/// are drawn once per entity and remove the entity with everything it holds;
/// history classes and `GraphState`/`GameText` are drawn once per context;
/// the rest are drawn per triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutClass {
    RoomName,
    RoomDescription,
    RoomBackstory,
    RoomObjects,
    RoomCharacters,
    ContainedObjects,
    WornObjects,
    WieldedObjects,
    CarriedObjects,
    Attribute,
    Persona,
    PhysicalDescription,
    CharacterInsideRoom,
    CharacterType,
    ObjectInsideRoom,
    ObjectType,
    DialogueHistory,
    StateMutationsHistory,
    GraphState,
    GameText,
}

impl DropoutClass {
    pub const ALL: [DropoutClass; 20] = [
        DropoutClass::RoomName,
        DropoutClass::RoomDescription,
        DropoutClass::RoomBackstory,
        DropoutClass::RoomObjects,
        DropoutClass::RoomCharacters,
        DropoutClass::ContainedObjects,
        DropoutClass::WornObjects,
        DropoutClass::WieldedObjects,
        DropoutClass::CarriedObjects,
        DropoutClass::Attribute,
        DropoutClass::Persona,
        DropoutClass::PhysicalDescription,
        DropoutClass::CharacterInsideRoom,
        DropoutClass::CharacterType,
        DropoutClass::ObjectInsideRoom,
        DropoutClass::ObjectType,
        DropoutClass::DialogueHistory,
        DropoutClass::StateMutationsHistory,
        DropoutClass::GraphState,
        DropoutClass::GameText,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropoutClass::RoomName => "room_name",
            DropoutClass::RoomDescription => "room_description",
            DropoutClass::RoomBackstory => "room_backstory",
            DropoutClass::RoomObjects => "room_objects",
            DropoutClass::RoomCharacters => "room_characters",
            DropoutClass::ContainedObjects => "contained_objects",
            DropoutClass::WornObjects => "worn_objects",
            DropoutClass::WieldedObjects => "wielded_objects",
            DropoutClass::CarriedObjects => "carried_objects",
            DropoutClass::Attribute => "attribute",
            DropoutClass::Persona => "persona",
            DropoutClass::PhysicalDescription => "physical_description",
            DropoutClass::CharacterInsideRoom => "character_inside_room",
            DropoutClass::CharacterType => "character_type",
            DropoutClass::ObjectInsideRoom => "object_inside_room",
            DropoutClass::ObjectType => "object_type",
            DropoutClass::DialogueHistory => "dialogue_history",
            DropoutClass::StateMutationsHistory => "state_mutations_history",
            DropoutClass::GraphState => "graph_state",
            DropoutClass::GameText => "game_text",
        }
    }

    pub fn is_entity(self) -> bool {
        matches!(
            self,
            DropoutClass::RoomObjects
                | DropoutClass::RoomCharacters
                | DropoutClass::ContainedObjects
                | DropoutClass::WornObjects
                | DropoutClass::WieldedObjects
                | DropoutClass::CarriedObjects
        )
    }
}

/// Per-class drop probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutConfig {
    pub room_name: f64,
    pub room_description: f64,
    pub room_backstory: f64,
    pub room_objects: f64,
    pub room_characters: f64,
    pub contained_objects: f64,
    pub worn_objects: f64,
    pub wielded_objects: f64,
    pub carried_objects: f64,
    pub attribute: f64,
    pub persona: f64,
    pub physical_description: f64,
    pub character_inside_room: f64,
    pub character_type: f64,
    pub object_inside_room: f64,
    pub object_type: f64,
    pub dialogue_history: f64,
    pub state_mutations_history: f64,
    pub graph_state: f64,
    pub game_text: f64,
}

impl Default for DropoutConfig {
    /// The standard training configuration.
    fn default() -> Self {
        DropoutConfig {
            room_name: 0.1,
            room_description: 0.1,
            room_backstory: 0.1,
            room_objects: 0.2,
            room_characters: 0.2,
            contained_objects: 0.0,
            worn_objects: 0.0,
            wielded_objects: 0.0,
            carried_objects: 0.0,
            attribute: 0.1,
            persona: 0.1,
            physical_description: 0.1,
            character_inside_room: 0.1,
            character_type: 0.1,
            object_inside_room: 0.1,
            object_type: 0.1,
            dialogue_history: 0.25,
            state_mutations_history: 0.25,
            graph_state: 0.25,
            game_text: 0.25,
        }
    }
}

impl DropoutConfig {
    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(p: f64) -> Self {
        let mut c = DropoutConfig::default();
        for class in DropoutClass::ALL {
            *c.slot(class) = p;
        }
        c
    }

    fn slot(&mut self, class: DropoutClass) -> &mut f64 {
        match class {
            DropoutClass::RoomName => &mut self.room_name,
            DropoutClass::RoomDescription => &mut self.room_description,
            DropoutClass::RoomBackstory => &mut self.room_backstory,
            DropoutClass::RoomObjects => &mut self.room_objects,
            DropoutClass::RoomCharacters => &mut self.room_characters,
            DropoutClass::ContainedObjects => &mut self.contained_objects,
            DropoutClass::WornObjects => &mut self.worn_objects,
            DropoutClass::WieldedObjects => &mut self.wielded_objects,
            DropoutClass::CarriedObjects => &mut self.carried_objects,
            DropoutClass::Attribute => &mut self.attribute,
            DropoutClass::Persona => &mut self.persona,
            DropoutClass::PhysicalDescription => &mut self.physical_description,
            DropoutClass::CharacterInsideRoom => &mut self.character_inside_room,
            DropoutClass::CharacterType => &mut self.character_type,
            DropoutClass::ObjectInsideRoom => &mut self.object_inside_room,
            DropoutClass::ObjectType => &mut self.object_type,
            DropoutClass::DialogueHistory => &mut self.dialogue_history,
            DropoutClass::StateMutationsHistory => &mut self.state_mutations_history,
            DropoutClass::GraphState => &mut self.graph_state,
            DropoutClass::GameText => &mut self.game_text,
        }
    }

    pub fn get(&self, class: DropoutClass) -> f64 {
        let mut copy = *self;
        *copy.slot(class)
    }

    pub fn with(mut self, class: DropoutClass, p: f64) -> Self {
        *self.slot(class) = p;
        self
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        for class in DropoutClass::ALL {
            let p = self.get(class);
            if !(0.0..=1.0).contains(&p) {
                return Err(TaskError::InvalidConfig(format!(
                    "{} = {p} is outside [0, 1]",
                    class.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// Probability of omitting the whole graph block from an input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphContextSetting {
    drop_probability: f64,
}

impl GraphContextSetting {
    pub const STANDARD: [f64; 3] = [0.25, 0.5, 1.0];

    /// Accepts only the standard settings.
    pub fn new(drop_probability: f64) -> Result<Self, TaskError> {
        if Self::STANDARD.contains(&drop_probability) {
            Ok(GraphContextSetting { drop_probability })
        } else {
            Err(TaskError::InvalidConfig(format!(
                "graph dropout {drop_probability} is not one of 0.25, 0.5, 1.0"
            )))
        }
    }

    /// Accepts any probability in [0, 1].
    pub fn free(drop_probability: f64) -> Result<Self, TaskError> {
        if (0.0..=1.0).contains(&drop_probability) {
            Ok(GraphContextSetting { drop_probability })
        } else {
            Err(TaskError::InvalidConfig(format!(
                "graph dropout {drop_probability} is outside [0, 1]"
            )))
        }
    }

    pub fn drop_probability(&self) -> f64 {
        self.drop_probability
    }
}

/// One Bernoulli keep/drop decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub class: DropoutClass,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DropoutOutcome {
    pub kept: Vec<Triple>,
    pub draws: Vec<Draw>,
    /// False when the graph-state gate removed all unprotected state triples.
    pub graph_gate_open: bool,
}

fn kind_of(kinds: &BTreeMap<String, NodeKind>, name: &str) -> NodeKind {
    kinds.get(name).copied().unwrap_or(NodeKind::Object)
}

/// The single dropout class of a triple. Location triples of contained or
/// held objects take the entity class; contained beats in-room.
pub fn classify_triple(
    t: &Triple,
    kinds: &BTreeMap<String, NodeKind>,
) -> Result<DropoutClass, TaskError> {
    let subject_kind = kind_of(kinds, &t.subject);
    let class = match t.edge {
        EdgeLabel::IsType => match NodeKind::from_type_value(&t.value) {
            Some(NodeKind::Room) => DropoutClass::RoomName,
            Some(NodeKind::Character) => DropoutClass::CharacterType,
            Some(NodeKind::Object) => DropoutClass::ObjectType,
            None => return Err(TaskError::UnclassifiableTriple(t.to_string())),
        },
        EdgeLabel::HasDescription if subject_kind == NodeKind::Room => DropoutClass::RoomDescription,
        EdgeLabel::HasDescription => DropoutClass::PhysicalDescription,
        EdgeLabel::HasBackstory => DropoutClass::RoomBackstory,
        EdgeLabel::HasPersona => DropoutClass::Persona,
        EdgeLabel::IsInside => match (kind_of(kinds, &t.value), subject_kind) {
            (NodeKind::Room, NodeKind::Character) => DropoutClass::CharacterInsideRoom,
            (NodeKind::Room, _) => DropoutClass::ObjectInsideRoom,
            _ => DropoutClass::ContainedObjects,
        },
        EdgeLabel::IsCarrying => DropoutClass::CarriedObjects,
        EdgeLabel::IsWearing => DropoutClass::WornObjects,
        EdgeLabel::IsWielding => DropoutClass::WieldedObjects,
        EdgeLabel::HadSaid => DropoutClass::DialogueHistory,
        EdgeLabel::HadActed | EdgeLabel::Observed => DropoutClass::StateMutationsHistory,
        _ => DropoutClass::Attribute,
    };
    Ok(class)
}

/// Entity gate class of a placing triple.
fn entity_class(t: &Triple, kinds: &BTreeMap<String, NodeKind>) -> Option<DropoutClass> {
    match t.edge {
        EdgeLabel::IsInside => Some(match (kind_of(kinds, &t.value), kind_of(kinds, &t.subject)) {
            (NodeKind::Room, NodeKind::Character) => DropoutClass::RoomCharacters,
            (NodeKind::Room, _) => DropoutClass::RoomObjects,
            _ => DropoutClass::ContainedObjects,
        }),
        EdgeLabel::IsCarrying => Some(DropoutClass::CarriedObjects),
        EdgeLabel::IsWearing => Some(DropoutClass::WornObjects),
        EdgeLabel::IsWielding => Some(DropoutClass::WieldedObjects),
        _ => None,
    }
}

/// The entity whose presence a triple depends on.
fn owner(t: &Triple) -> &str {
    t.contained_party().unwrap_or(&t.subject)
}

fn draw<R: Rng + ?Sized>(rng: &mut R, draws: &mut Vec<Draw>, config: &DropoutConfig, class: DropoutClass) -> bool {
    let kept = !rng.gen_bool(config.get(class));
    draws.push(Draw { class, kept });
    kept
}

/// [`apply_edge_dropout`] with every draw recorded.
///
/// Protected triples are always kept and consume no draws. Entity gates are
/// drawn for every placed entity, even under an already dropped holder, so
/// empirical per-class rates stay unbiased.
pub fn apply_edge_dropout_traced<R: Rng + ?Sized>(
    triples: &[Triple],
    config: &DropoutConfig,
    protected: &BTreeSet<Triple>,
    rng: &mut R,
) -> Result<DropoutOutcome, TaskError> {
    config.validate()?;
    let kinds = infer_kinds(triples.iter());
    let classes = triples
        .iter()
        .map(|t| classify_triple(t, &kinds))
        .collect::<Result<Vec<_>, _>>()?;
    let mut draws = Vec::new();

    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    let mut gate: BTreeMap<&str, bool> = BTreeMap::new();
    for t in triples {
        if let (Some(class), Some(child), Some(holder)) =
            (entity_class(t, &kinds), t.contained_party(), t.container_party())
        {
            parent.insert(child, holder);
            if !gate.contains_key(child) {
                let kept = draw(rng, &mut draws, config, class);
                gate.insert(child, kept);
            }
        }
    }
    let present = |name: &str| -> bool {
        let mut current = name;
        for _ in 0..=parent.len() {
            if gate.get(current) == Some(&false) {
                return false;
            }
            match parent.get(current) {
                Some(up) => current = up,
                None => return true,
            }
        }
        true
    };

    let has = |pred: fn(&DropoutClass) -> bool| {
        triples
            .iter()
            .zip(&classes)
            .any(|(t, c)| pred(c) && !protected.contains(t))
    };
    let dialogue = has(|c| *c == DropoutClass::DialogueHistory)
        .then(|| draw(rng, &mut draws, config, DropoutClass::DialogueHistory));
    let mutations = has(|c| *c == DropoutClass::StateMutationsHistory)
        .then(|| draw(rng, &mut draws, config, DropoutClass::StateMutationsHistory));
    let graph_gate_open = if triples.iter().any(|t| !t.edge.is_history()) {
        draw(rng, &mut draws, config, DropoutClass::GraphState)
    } else {
        true
    };

    let mut kept = Vec::new();
    for (t, &class) in triples.iter().zip(&classes) {
        if protected.contains(t) {
            kept.push(t.clone());
            continue;
        }
        let keep = match class {
            DropoutClass::DialogueHistory => dialogue.unwrap_or(true),
            DropoutClass::StateMutationsHistory => mutations.unwrap_or(true),
            c => {
                let class_kept = c.is_entity() || draw(rng, &mut draws, config, c);
                graph_gate_open && class_kept && present(owner(t))
            }
        };
        if keep {
            kept.push(t.clone());
        }
    }
    Ok(DropoutOutcome { kept, draws, graph_gate_open })
}

/// Drops triples by class with the configured probabilities, preserving
/// order and never dropping a protected triple.
pub fn apply_edge_dropout<R: Rng + ?Sized>(
    triples: &[Triple],
    config: &DropoutConfig,
    protected: &BTreeSet<Triple>,
    rng: &mut R,
) -> Result<Vec<Triple>, TaskError> {
    Ok(apply_edge_dropout_traced(triples, config, protected, rng)?.kept)
}
