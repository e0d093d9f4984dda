//! Rule-based action engine: parsing, validation, execution, narration, and
//! the GameText view of a world.

mod action;
mod narrate;
mod random;
mod rules;
mod world;

pub use action::{parse_action, resolve_target, CanonicalAction, ParseError, Verb};
pub use narrate::{
    observer_narration, render_game_text, render_room_view, templated_narration, GameText,
};
pub(crate) use narrate::narration_for;
pub use random::{enumerate_actions, random_action};
pub use rules::{act, execute, validate, ExecutionResult, Validity};
pub use world::{
    load_fixture_dir, CharacterFixture, FixtureLocation, ObjectFixture, PlaythroughStep,
    RoomFixture, World, WorldFixture, DEFAULT_HEALTH, DEFAULT_HISTORY_WINDOW, DEFAULT_STRENGTH,
};

use crate::graph::GraphError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("world invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("`{0}` is not a character in this world")]
    UnknownActor(String),
    #[error("no actions available for `{0}`")]
    NoActionsAvailable(String),
}
