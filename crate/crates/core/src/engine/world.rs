use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::graph::{EdgeLabel, NodeKind, NodeRef, Triple, WorldGraph};

pub const DEFAULT_HISTORY_WINDOW: usize = 8;
pub const DEFAULT_HEALTH: i64 = 10;
pub const DEFAULT_STRENGTH: i64 = 1;

/// A playable world: the graph plus what the triple vocabulary cannot express
/// (room adjacency) and the seed that drives stochastic choices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub id: String,
    pub graph: WorldGraph,
    pub neighbors: BTreeMap<String, BTreeSet<String>>,
    pub rng_seed: u64,
    pub history_window: usize,
    pub player: Option<String>,
}

impl World {
    pub fn new(id: impl Into<String>, graph: WorldGraph) -> Self {
        World {
            id: id.into(),
            graph,
            neighbors: BTreeMap::new(),
            rng_seed: 0,
            history_window: DEFAULT_HISTORY_WINDOW,
            player: None,
        }
    }

    pub fn from_fixture(fixture: &WorldFixture) -> Result<World, EngineError> {
        fixture.build()
    }

    pub fn load(path: &Path) -> Result<World, EngineError> {
        WorldFixture::load(path)?.build()
    }

    pub fn rooms(&self) -> Vec<&NodeRef> {
        self.graph.nodes_of_kind(NodeKind::Room)
    }

    pub fn actors(&self) -> Vec<&NodeRef> {
        self.graph.nodes_of_kind(NodeKind::Character)
    }

    pub fn node(&self, name: &str) -> Option<&NodeRef> {
        self.graph.node_by_name(name)
    }

    pub fn is_kind(&self, name: &str, kind: NodeKind) -> bool {
        self.graph.kind_of(name) == Some(kind)
    }

    pub fn room_of(&self, name: &str) -> Option<&str> {
        self.graph.room_of(name)
    }

    /// Characters whose containment chain ends in `room`, sorted by name.
    pub fn characters_in(&self, room: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .actors()
            .into_iter()
            .filter(|n| self.room_of(&n.display_name) == Some(room))
            .map(|n| n.display_name.clone())
            .collect();
        out.sort();
        out
    }

    pub fn holds_with(&self, actor: &str, edge: EdgeLabel, item: &str) -> bool {
        self.graph.contains(&Triple::new(actor, edge, item))
    }

    /// Carried, worn, or wielded by `actor`.
    pub fn holds(&self, actor: &str, item: &str) -> bool {
        self.graph
            .location_of(item)
            .is_some_and(|t| t.edge.is_carrier() && t.subject == actor)
    }

    /// True when `item` sits in `actor`'s room without being held by any
    /// character, possibly nested inside containers.
    pub fn co_located(&self, actor: &str, item: &str) -> bool {
        let Some(room) = self.room_of(actor) else {
            return false;
        };
        let mut current = item;
        let mut steps = 0;
        while let Some(t) = self.graph.location_of(current) {
            if t.edge.is_carrier() {
                return false;
            }
            let parent = t.value.as_str();
            if parent == room {
                return true;
            }
            if self.is_kind(parent, NodeKind::Character) {
                return false;
            }
            current = parent;
            steps += 1;
            if steps > 64 {
                return false;
            }
        }
        false
    }

    /// Held by the actor or reachable in the room.
    pub fn available(&self, actor: &str, item: &str) -> bool {
        self.holds(actor, item) || self.co_located(actor, item)
    }

    pub fn same_room(&self, a: &str, b: &str) -> bool {
        match (self.room_of(a), self.room_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn neighbors_of(&self, room: &str) -> impl Iterator<Item = &String> {
        self.neighbors.get(room).into_iter().flatten()
    }

    /// Every name the actor can refer to: its room, adjacent rooms, characters
    /// in the room, everything reachable in the room, and everything those
    /// characters hold. Sorted and deduplicated.
    pub fn visible_names(&self, actor: &str) -> Vec<String> {
        let mut out = BTreeSet::new();
        let Some(room) = self.room_of(actor) else {
            return Vec::new();
        };
        out.insert(room.to_string());
        out.extend(self.neighbors_of(room).cloned());
        for name in self.graph.descendants_of(room) {
            out.insert(name);
        }
        out.into_iter().collect()
    }

    pub fn health(&self, name: &str) -> i64 {
        self.graph
            .value_of(name, EdgeLabel::HasHealthLevel)
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_HEALTH)
    }

    pub fn strength(&self, name: &str) -> i64 {
        self.graph
            .value_of(name, EdgeLabel::HasStrengthLevel)
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_STRENGTH)
    }

    pub fn is_dead(&self, name: &str) -> bool {
        self.graph.is_true(name, EdgeLabel::IsDead)
    }

    /// Checks the engine-level invariants on top of the graph's own.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        self.graph.check_invariants()?;
        for actor in self.actors() {
            if self.room_of(&actor.display_name).is_none() {
                return Err(EngineError::Invariant(format!(
                    "character `{}` is not in a room",
                    actor.display_name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureLocation {
    Inside(String),
    CarriedBy(String),
    WornBy(String),
    WieldedBy(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomFixture {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub backstory: Option<String>,
    #[serde(default)]
    pub neighbors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterFixture {
    pub name: String,
    pub room: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub persona: Option<String>,
    #[serde(default)]
    pub health: Option<i64>,
    #[serde(default)]
    pub strength: Option<i64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectFixture {
    pub name: String,
    pub location: FixtureLocation,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default = "yes")]
    pub gettable: bool,
    #[serde(default)]
    pub drink: bool,
    #[serde(default)]
    pub food: bool,
    #[serde(default)]
    pub container: bool,
    #[serde(default)]
    pub surface: bool,
    #[serde(default)]
    pub wearable: bool,
    #[serde(default)]
    pub wieldable: bool,
    #[serde(default)]
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaythroughStep {
    pub actor: String,
    pub action: String,
}

/// JSON world description. Names must be unique across rooms, characters,
/// and objects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldFixture {
    pub id: String,
    #[serde(default)]
    pub player: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub rooms: Vec<RoomFixture>,
    #[serde(default)]
    pub characters: Vec<CharacterFixture>,
    #[serde(default)]
    pub objects: Vec<ObjectFixture>,
    /// Recorded actions, replayed in order from the initial state.
    #[serde(default)]
    pub playthrough: Vec<PlaythroughStep>,
}

impl WorldFixture {
    pub fn load(path: &Path) -> Result<WorldFixture, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| EngineError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<World, EngineError> {
        let mut g = WorldGraph::new();
        let mut seen = BTreeSet::new();
        let mut claim = |name: &str| -> Result<(), EngineError> {
            if !seen.insert(name.to_string()) {
                return Err(EngineError::Fixture(format!("duplicate name `{name}`")));
            }
            Ok(())
        };
        for r in &self.rooms {
            claim(&r.name)?;
            g.add_node(&r.name, NodeKind::Room)?;
        }
        for c in &self.characters {
            claim(&c.name)?;
            g.add_node(&c.name, NodeKind::Character)?;
        }
        for o in &self.objects {
            claim(&o.name)?;
            g.add_node(&o.name, NodeKind::Object)?;
        }

        let mut neighbors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for r in &self.rooms {
            g.upsert_triple(Triple::new(&r.name, EdgeLabel::IsType, "room"))?;
            if let Some(d) = &r.description {
                g.upsert_triple(Triple::new(&r.name, EdgeLabel::HasDescription, d))?;
            }
            if let Some(b) = &r.backstory {
                g.upsert_triple(Triple::new(&r.name, EdgeLabel::HasBackstory, b))?;
            }
            for n in &r.neighbors {
                if g.kind_of(n) != Some(NodeKind::Room) {
                    return Err(EngineError::Fixture(format!(
                        "room `{}` lists unknown neighbor `{n}`",
                        r.name
                    )));
                }
                neighbors.entry(r.name.clone()).or_default().insert(n.clone());
                neighbors.entry(n.clone()).or_default().insert(r.name.clone());
            }
        }
        for c in &self.characters {
            if g.kind_of(&c.room) != Some(NodeKind::Room) {
                return Err(EngineError::Fixture(format!(
                    "character `{}` placed in unknown room `{}`",
                    c.name, c.room
                )));
            }
            g.upsert_triple(Triple::new(&c.name, EdgeLabel::IsType, "character"))?;
            g.upsert_triple(Triple::new(&c.name, EdgeLabel::IsInside, &c.room))?;
            if let Some(d) = &c.description {
                g.upsert_triple(Triple::new(&c.name, EdgeLabel::HasDescription, d))?;
            }
            if let Some(p) = &c.persona {
                g.upsert_triple(Triple::new(&c.name, EdgeLabel::HasPersona, p))?;
            }
            let health = c.health.unwrap_or(DEFAULT_HEALTH);
            let strength = c.strength.unwrap_or(DEFAULT_STRENGTH);
            g.upsert_triple(Triple::new(&c.name, EdgeLabel::HasHealthLevel, health.to_string()))?;
            g.upsert_triple(Triple::new(
                &c.name,
                EdgeLabel::HasStrengthLevel,
                strength.to_string(),
            ))?;
        }
        for o in &self.objects {
            g.upsert_triple(Triple::new(&o.name, EdgeLabel::IsType, "object"))?;
            if let Some(d) = &o.description {
                g.upsert_triple(Triple::new(&o.name, EdgeLabel::HasDescription, d))?;
            }
            for (edge, v) in [
                (EdgeLabel::IsGettable, o.gettable),
                (EdgeLabel::IsDrink, o.drink),
                (EdgeLabel::IsFood, o.food),
                (EdgeLabel::IsContainer, o.container),
                (EdgeLabel::IsSurface, o.surface),
                (EdgeLabel::IsWearable, o.wearable),
                (EdgeLabel::IsWieldable, o.wieldable),
            ] {
                g.upsert_triple(Triple::boolean(&o.name, edge, v))?;
            }
            for a in &o.attributes {
                g.upsert_triple(Triple::new(&o.name, EdgeLabel::HasAttribute, a.to_lowercase()))?;
            }
        }
        for o in &self.objects {
            let (t, holder_kind) = match &o.location {
                FixtureLocation::Inside(p) => (Triple::new(&o.name, EdgeLabel::IsInside, p), None),
                FixtureLocation::CarriedBy(c) => (
                    Triple::new(c, EdgeLabel::IsCarrying, &o.name),
                    Some(NodeKind::Character),
                ),
                FixtureLocation::WornBy(c) => (
                    Triple::new(c, EdgeLabel::IsWearing, &o.name),
                    Some(NodeKind::Character),
                ),
                FixtureLocation::WieldedBy(c) => (
                    Triple::new(c, EdgeLabel::IsWielding, &o.name),
                    Some(NodeKind::Character),
                ),
            };
            let holder = t.container_party().unwrap_or_default().to_string();
            match (g.kind_of(&holder), holder_kind) {
                (None, _) => {
                    return Err(EngineError::Fixture(format!(
                        "object `{}` placed in unknown `{holder}`",
                        o.name
                    )))
                }
                (Some(k), Some(want)) if k != want => {
                    return Err(EngineError::Fixture(format!(
                        "object `{}` held by non-character `{holder}`",
                        o.name
                    )))
                }
                _ => {}
            }
            g.insert_strict(t)?;
        }
        if let Some(p) = &self.player {
            if g.kind_of(p) != Some(NodeKind::Character) {
                return Err(EngineError::Fixture(format!("player `{p}` is not a character")));
            }
        }
        let world = World {
            id: self.id.clone(),
            graph: g,
            neighbors,
            rng_seed: self.seed,
            history_window: DEFAULT_HISTORY_WINDOW,
            player: self.player.clone(),
        };
        world.check_invariants()?;
        Ok(world)
    }
}

/// Loads every `*.json` fixture in a directory, sorted by file name.
pub fn load_fixture_dir(dir: &Path) -> Result<Vec<WorldFixture>, EngineError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| EngineError::Fixture(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| WorldFixture::load(p)).collect()
}
