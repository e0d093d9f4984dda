use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::builders::{
    build_attribute_example, build_element_example, build_graph_update_example, build_narration_example,
    build_room_example, build_text_attribute_example, perceivers, ActionOrigin, ActionSource, AttributeQuery,
    Built, ElementKind, RoomTextKind, TextAttribute,
};
use super::context::ContextConfig;
use super::{export_dataset, import_dataset, TaskError, TaskExample, TaskKind};
use crate::engine::{
    act, enumerate_actions, execute, load_fixture_dir, parse_action, validate, CanonicalAction, PlaythroughStep,
    World, WorldFixture,
};
use crate::graph::{EdgeLabel, NodeKind};
use crate::use_events::{load_use_events, split_indices, UseEvent};

/// Raw material for a dataset.
#[derive(Debug, Clone, Default)]
pub struct Sources {
    pub worlds: Vec<WorldFixture>,
    pub use_events: Vec<UseEvent>,
}

impl Sources {
    pub fn load(worlds_dir: &Path, use_events: Option<&Path>) -> Result<Sources, TaskError> {
        Ok(Sources {
            worlds: load_fixture_dir(worlds_dir)?,
            use_events: match use_events {
                Some(p) => load_use_events(p)?,
                None => Vec::new(),
            },
        })
    }

    pub fn fixture(&self, id: &str) -> Option<&WorldFixture> {
        self.worlds.iter().find(|w| w.id == id)
    }

    /// Rebuilds the world an example was generated from: the fixture's
    /// initial state with `prior` replayed through the parser.
    pub fn replay(&self, world_id: &str, prior: &[PlaythroughStep]) -> Result<World, TaskError> {
        let fixture = self
            .fixture(world_id)
            .ok_or_else(|| TaskError::InvalidConfig(format!("unknown world `{world_id}`")))?;
        let mut world = fixture.build()?;
        for step in prior {
            act(&mut world, &step.actor, &step.action)?;
        }
        Ok(world)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub seed: u64,
    pub context: ContextConfig,
    pub tasks: Vec<TaskKind>,
    /// Examples per task before weighting.
    pub examples_per_task: usize,
    /// Multiplies `examples_per_task`; absent tasks weigh 1.0.
    pub weights: BTreeMap<TaskKind, f64>,
    /// Upper bound on random actions played before a self-play example.
    pub max_prior_steps: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            seed: 0,
            context: ContextConfig::default(),
            tasks: TaskKind::ALL.to_vec(),
            examples_per_task: 100,
            weights: BTreeMap::new(),
            max_prior_steps: 3,
        }
    }
}

impl BuildConfig {
    pub fn count_for(&self, task: TaskKind) -> usize {
        let w = self.weights.get(&task).copied().unwrap_or(1.0);
        (self.examples_per_task as f64 * w).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        self.context.dropout.validate()?;
        if let Some((k, w)) = self.weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(TaskError::InvalidConfig(format!("weight {w} for {k}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
    UnseenTest,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [SplitName::Train, SplitName::Valid, SplitName::Test, SplitName::UnseenTest];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
            SplitName::UnseenTest => "unseen_test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.as_str())
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub split: SplitName,
    pub built: Built,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub splits: BTreeMap<SplitName, Vec<TaskExample>>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn split(&self, name: SplitName) -> &[TaskExample] {
        self.splits.get(&name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &TaskExample> {
        self.splits.values().flatten()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-example seed, so any example regenerates alone.
pub fn example_seed(base: u64, task: TaskKind, index: usize) -> u64 {
    let task_id = TaskKind::ALL.iter().position(|k| *k == task).unwrap_or(0) as u64;
    splitmix64(splitmix64(splitmix64(base) ^ task_id) ^ index as u64)
}

/// Split for examples not tied to a UseEvent: one in twenty each to valid
/// and test.
fn hashed_split(seed: u64) -> SplitName {
    match splitmix64(seed) % 20 {
        0 => SplitName::Valid,
        1 => SplitName::Test,
        _ => SplitName::Train,
    }
}

/// A recorded playthrough step, ready to build from.
struct GameStep {
    world: World,
    actor: String,
    action: CanonicalAction,
    prior: Vec<PlaythroughStep>,
}

/// Whether the canonical text of `action` parses back to the same action.
fn round_trips(world: &World, actor: &str, action: &CanonicalAction) -> bool {
    match parse_action(&action.text(), world, actor) {
        Ok(parsed) => {
            parsed.verb == action.verb
                && parsed.primary_name() == action.primary_name()
                && parsed.secondary_name() == action.secondary_name()
        }
        Err(_) => false,
    }
}

fn game_steps(worlds: &[(WorldFixture, World)]) -> Result<Vec<GameStep>, TaskError> {
    let mut out = Vec::new();
    for (fixture, initial) in worlds {
        let mut world = initial.clone();
        let mut prior = Vec::new();
        for step in &fixture.playthrough {
            if let Ok(action) = parse_action(&step.action, &world, &step.actor) {
                if round_trips(&world, &step.actor, &action) {
                    out.push(GameStep {
                        world: world.clone(),
                        actor: step.actor.clone(),
                        action,
                        prior: prior.clone(),
                    });
                }
            }
            act(&mut world, &step.actor, &step.action)?;
            prior.push(step.clone());
        }
    }
    Ok(out)
}

/// Characters placed in some room, in name order.
fn placed_characters(world: &World) -> Vec<String> {
    let mut v: Vec<String> = world
        .actors()
        .into_iter()
        .map(|n| n.display_name.clone())
        .filter(|n| world.room_of(n).is_some())
        .collect();
    v.sort();
    v
}

/// A uniform draw over enumerated actions of the wanted validity whose text
/// re-parses to the same action.
fn draw_action<R: Rng + ?Sized>(world: &World, actor: &str, valid: bool, rng: &mut R) -> Option<CanonicalAction> {
    let mut pool: Vec<CanonicalAction> = enumerate_actions(world, actor)
        .into_iter()
        .filter(|a| validate(world, actor, a).is_valid() == valid)
        .collect();
    pool.shuffle(rng);
    pool.into_iter().find(|a| round_trips(world, actor, a))
}

/// Plays up to `max_steps` random valid actions, recording them.
fn random_prefix<R: Rng + ?Sized>(
    world: &mut World,
    max_steps: usize,
    rng: &mut R,
) -> Result<Vec<PlaythroughStep>, TaskError> {
    let steps = rng.gen_range(0..=max_steps);
    let mut prior = Vec::new();
    for _ in 0..steps {
        let actors = placed_characters(world);
        let Some(actor) = actors.choose(rng).cloned() else { break };
        if let Some(action) = draw_action(world, &actor, true, rng) {
            execute(world, &actor, &action)?;
            prior.push(PlaythroughStep { actor, action: action.text() });
        }
    }
    Ok(prior)
}

struct Generator<'a> {
    cfg: &'a BuildConfig,
    sources: &'a Sources,
    worlds: Vec<(WorldFixture, World)>,
    game: Vec<GameStep>,
    event_order: Vec<usize>,
    event_split: BTreeMap<usize, SplitName>,
}

impl Generator<'_> {
    fn action_example(&self, task: TaskKind, world: &World, actor: &str, source: &ActionSource<'_>, seed: u64, rng: &mut ChaCha8Rng) -> Result<Built, TaskError> {
        if task.is_narration() {
            let observers = perceivers(world, actor, source)?;
            let observer = observers.choose(rng).cloned().unwrap_or_else(|| actor.to_string());
            build_narration_example(world, actor, &observer, source, seed, &self.cfg.context)
        } else {
            build_graph_update_example(world, actor, source, seed, &self.cfg.context)
        }
    }

    fn game(&self, task: TaskKind, seed: u64, rng: &mut ChaCha8Rng) -> Result<Option<Built>, TaskError> {
        let Some(step) = self.game.choose(rng) else { return Ok(None) };
        let source = ActionSource::Engine { action: &step.action, origin: ActionOrigin::Game };
        let mut built = self.action_example(task, &step.world, &step.actor, &source, seed, rng)?;
        built.example.provenance.prior = step.prior.clone();
        Ok(Some(built))
    }

    fn self_play(&self, task: TaskKind, valid: bool, seed: u64, rng: &mut ChaCha8Rng) -> Result<Option<Built>, TaskError> {
        let mut order: Vec<usize> = (0..self.worlds.len()).collect();
        order.shuffle(rng);
        for wi in order {
            let mut world = self.worlds[wi].1.clone();
            let prior = random_prefix(&mut world, self.cfg.max_prior_steps, rng)?;
            let mut actors = placed_characters(&world);
            actors.shuffle(rng);
            for actor in actors {
                let Some(action) = draw_action(&world, &actor, valid, rng) else { continue };
                let origin = if valid { ActionOrigin::SelfPlay } else { ActionOrigin::InvalidSelfPlay };
                let source = ActionSource::Engine { action: &action, origin };
                let mut built = self.action_example(task, &world, &actor, &source, seed, rng)?;
                built.example.provenance.prior = prior;
                return Ok(Some(built));
            }
        }
        Ok(None)
    }

    fn use_event(&self, task: TaskKind, index: usize, seed: u64, rng: &mut ChaCha8Rng) -> Result<Option<(Built, usize)>, TaskError> {
        if self.event_order.is_empty() {
            return Ok(None);
        }
        let ei = self.event_order[index % self.event_order.len()];
        let event = &self.sources.use_events[ei];
        let mut combos: Vec<(usize, String)> = self
            .worlds
            .iter()
            .enumerate()
            .flat_map(|(wi, (_, w))| placed_characters(w).into_iter().map(move |a| (wi, a)))
            .collect();
        combos.shuffle(rng);
        let mut last_err = None;
        for (wi, actor) in combos {
            let world = &self.worlds[wi].1;
            let source = ActionSource::UseEvent { event, index: ei };
            match self.action_example(task, world, &actor, &source, seed, rng) {
                Ok(b) => return Ok(Some((b, ei))),
                Err(e @ (TaskError::UseEvent(_) | TaskError::Graph(_))) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        match last_err {
            Some(e) => Err(e),
            None => Ok(None),
        }
    }

    /// Tries worlds in random order until one has a suitable element.
    fn environment(&self, task: TaskKind, seed: u64, rng: &mut ChaCha8Rng) -> Result<Option<Built>, TaskError> {
        let mut order: Vec<usize> = (0..self.worlds.len()).collect();
        order.shuffle(rng);
        let cfg = &self.cfg.context;
        for wi in order {
            let world = &self.worlds[wi].1;
            let result = match task {
                TaskKind::AddCharacter => build_element_example(world, ElementKind::Character, seed, cfg),
                TaskKind::AddObject => build_element_example(world, ElementKind::Object, seed, cfg),
                TaskKind::AddObjectContains => build_element_example(world, ElementKind::Contained, seed, cfg),
                TaskKind::AddCharacterCarrying => build_element_example(world, ElementKind::Carried, seed, cfg),
                TaskKind::AddCharacterWearing => build_element_example(world, ElementKind::Worn, seed, cfg),
                TaskKind::AddCharacterWielding => build_element_example(world, ElementKind::Wielded, seed, cfg),
                TaskKind::AddCharacterDescription => {
                    build_text_attribute_example(world, TextAttribute::CharacterDescription, seed, cfg)
                }
                TaskKind::AddObjectDescription => {
                    build_text_attribute_example(world, TextAttribute::ObjectDescription, seed, cfg)
                }
                TaskKind::AddCharacterPersona => {
                    build_text_attribute_example(world, TextAttribute::CharacterPersona, seed, cfg)
                }
                TaskKind::ObjectsAttributes => {
                    let mut objects: Vec<String> = world
                        .graph
                        .nodes_of_kind(NodeKind::Object)
                        .into_iter()
                        .map(|n| n.display_name.clone())
                        .filter(|o| world.room_of(o).is_some() && !AttributeQuery::available(world, o).is_empty())
                        .collect();
                    objects.sort();
                    let Some(object) = objects.choose(rng) else { continue };
                    let queries = AttributeQuery::available(world, object);
                    let query = queries.choose(rng).expect("filtered to nonempty");
                    build_attribute_example(world, object, query, seed, cfg)
                }
                TaskKind::RoomDescription | TaskKind::RoomBackstory => {
                    let (kind, edge) = if task == TaskKind::RoomDescription {
                        (RoomTextKind::Description, EdgeLabel::HasDescription)
                    } else {
                        (RoomTextKind::Backstory, EdgeLabel::HasBackstory)
                    };
                    let mut rooms: Vec<String> = world
                        .rooms()
                        .into_iter()
                        .map(|n| n.display_name.clone())
                        .filter(|r| world.graph.value_of(r, edge).is_some())
                        .collect();
                    rooms.sort();
                    let Some(room) = rooms.choose(rng) else { continue };
                    build_room_example(world, room, kind, seed, cfg)
                }
                _ => unreachable!("action tasks are dispatched elsewhere"),
            };
            match result {
                Ok(b) => return Ok(Some(b)),
                Err(TaskError::NothingToRemove(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    fn one(&self, task: TaskKind, index: usize) -> Result<Option<Generated>, TaskError> {
        let seed = example_seed(self.cfg.seed, task, index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let built = match task {
            TaskKind::GameActions | TaskKind::GameActionsNarration => self.game(task, seed, &mut rng)?,
            TaskKind::SelfPlayActions | TaskKind::SelfPlayActionsNarration => {
                self.self_play(task, true, seed, &mut rng)?
            }
            TaskKind::InvalidSelfPlay | TaskKind::InvalidSelfPlayNarration => {
                self.self_play(task, false, seed, &mut rng)?
            }
            TaskKind::UseEventActions | TaskKind::UseEventActionsNarration => {
                return Ok(self.use_event(task, index, seed, &mut rng)?.map(|(built, ei)| Generated {
                    split: self.event_split.get(&ei).copied().unwrap_or(SplitName::Train),
                    built,
                }));
            }
            _ => self.environment(task, seed, &mut rng)?,
        };
        Ok(built.map(|built| Generated { split: hashed_split(seed), built }))
    }
}

/// Generates every example with its split and dropout trace, in task then
/// index order. Tasks with no usable source are skipped with a warning.
pub fn generate(sources: &Sources, cfg: &BuildConfig) -> Result<(Vec<Generated>, Vec<String>), TaskError> {
    cfg.validate()?;
    let worlds = sources
        .worlds
        .iter()
        .map(|f| Ok((f.clone(), f.build()?)))
        .collect::<Result<Vec<_>, TaskError>>()?;
    let game = game_steps(&worlds)?;
    let mut warnings = Vec::new();

    let mut event_order: Vec<usize> = (0..sources.use_events.len()).collect();
    event_order.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed)));
    let mut event_split = BTreeMap::new();
    if cfg.tasks.iter().any(|t| t.is_use_event()) && !sources.use_events.is_empty() {
        match split_indices(&sources.use_events, cfg.seed) {
            Ok(idx) => {
                for (name, members) in [
                    (SplitName::Train, &idx.train),
                    (SplitName::Valid, &idx.valid),
                    (SplitName::Test, &idx.test),
                    (SplitName::UnseenTest, &idx.unseen_test),
                ] {
                    for &i in members {
                        event_split.insert(i, name);
                    }
                }
                warnings.extend(idx.warnings);
            }
            Err(e) => warnings.push(format!("UseEvents not split, all in train: {e}")),
        }
    }

    let generator = Generator { cfg, sources, worlds, game, event_order, event_split };
    let mut out = Vec::new();
    for &task in &cfg.tasks {
        let n = cfg.count_for(task);
        let mut made = 0;
        for i in 0..n {
            if let Some(g) = generator.one(task, i)? {
                out.push(g);
                made += 1;
            }
        }
        if made < n {
            let msg = format!("{task}: built {made} of {n} examples; sources lack suitable material");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok((out, warnings))
}

pub fn build_dataset(sources: &Sources, cfg: &BuildConfig) -> Result<Dataset, TaskError> {
    let (generated, warnings) = generate(sources, cfg)?;
    let mut splits: BTreeMap<SplitName, Vec<TaskExample>> =
        SplitName::ALL.into_iter().map(|s| (s, Vec::new())).collect();
    for g in generated {
        splits.entry(g.split).or_default().push(g.built.example);
    }
    Ok(Dataset { splits, warnings })
}

/// Writes one JSONL file per split, empty splits included.
pub fn write_dataset_dir(dataset: &Dataset, dir: &Path) -> Result<(), TaskError> {
    std::fs::create_dir_all(dir).map_err(|e| TaskError::Io(format!("{}: {e}", dir.display())))?;
    for name in SplitName::ALL {
        export_dataset(dataset.split(name), &dir.join(name.file_name()))?;
    }
    Ok(())
}

/// Reads whichever split files exist in `dir`.
pub fn read_dataset_dir(dir: &Path) -> Result<Dataset, TaskError> {
    let mut splits = BTreeMap::new();
    for name in SplitName::ALL {
        let p = dir.join(name.file_name());
        if p.exists() {
            splits.insert(name, import_dataset(&p)?);
        }
    }
    if splits.is_empty() {
        return Err(TaskError::Io(format!("no split files in {}", dir.display())));
    }
    Ok(Dataset { splits, warnings: Vec::new() })
}
