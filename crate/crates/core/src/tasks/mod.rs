//! Grounding-task construction: context assembly with dropout, prompt
//! templating, label generation for all twenty task kinds, dataset building,
//! statistics, and JSONL export.

mod builders;
mod context;
mod dataset;
mod dropout;
mod prompts;
mod stats;

pub use builders::{
    build_attribute_example, build_element_example, build_graph_update_example,
    build_narration_example, build_room_example, build_text_attribute_example, protected_for,
    ActionOrigin, ActionSource, AttributeQuery, Built, ElementKind, RoomTextKind, TextAttribute,
};
pub use context::{
    assemble_context, AssembledContext, ContextConfig, ContextTrace, View, DEFAULT_TOKEN_BUDGET,
    GAME_TEXT_HEADER, GRAPH_HEADER, HISTORY_HEADER,
};
pub use dataset::{
    build_dataset, example_seed, generate, read_dataset_dir, write_dataset_dir, BuildConfig, Dataset, Generated,
    Sources, SplitName,
};
pub use dropout::{
    apply_edge_dropout, apply_edge_dropout_traced, classify_triple, DropoutClass, DropoutConfig,
    DropoutOutcome, Draw, GraphContextSetting,
};
pub use prompts::{graph_update_prompt, narration_prompt, prompt_variants, PromptKind};
pub use stats::{compute_stats, tokenize, DatasetStats, SideStats, TaskStats};

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, PlaythroughStep};
use crate::graph::GraphError;
use crate::use_events::UseEventError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    UseEvent(#[from] UseEventError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no removable {0} element in the world")]
    NothingToRemove(String),
    #[error("observer `{observer}` does not perceive the action of `{actor}`")]
    ObserverNotPresent { observer: String, actor: String },
    #[error("`{object}` has no ground-truth value for `{attribute}`")]
    UnknownAttribute { object: String, attribute: String },
    #[error("room `{room}` has no {kind}")]
    MissingRoomText { room: String, kind: String },
    #[error("cannot classify triple `{0}` for dropout")]
    UnclassifiableTriple(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
}

impl From<std::io::Error> for TaskError {
    fn from(e: std::io::Error) -> Self {
        TaskError::Io(e.to_string())
    }
}

/// The twenty task datasets. Serialized under these exact names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    AddCharacterCarrying,
    AddCharacterDescription,
    AddCharacterPersona,
    AddCharacter,
    AddCharacterWearing,
    AddCharacterWielding,
    AddObjectContains,
    AddObjectDescription,
    AddObject,
    ObjectsAttributes,
    RoomBackstory,
    RoomDescription,
    GameActions,
    GameActionsNarration,
    InvalidSelfPlay,
    InvalidSelfPlayNarration,
    SelfPlayActions,
    SelfPlayActionsNarration,
    UseEventActions,
    UseEventActionsNarration,
}

/// How a task's label text is to be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelGrammar {
    /// `ADD:`/`DEL:` lines or `NO_MUTATION`.
    Delta,
    /// One or more `subject EDGE value` lines.
    Triples,
    FreeText,
}

impl TaskKind {
    pub const ALL: [TaskKind; 20] = [
        TaskKind::AddCharacterCarrying,
        TaskKind::AddCharacterDescription,
        TaskKind::AddCharacterPersona,
        TaskKind::AddCharacter,
        TaskKind::AddCharacterWearing,
        TaskKind::AddCharacterWielding,
        TaskKind::AddObjectContains,
        TaskKind::AddObjectDescription,
        TaskKind::AddObject,
        TaskKind::ObjectsAttributes,
        TaskKind::RoomBackstory,
        TaskKind::RoomDescription,
        TaskKind::GameActions,
        TaskKind::GameActionsNarration,
        TaskKind::InvalidSelfPlay,
        TaskKind::InvalidSelfPlayNarration,
        TaskKind::SelfPlayActions,
        TaskKind::SelfPlayActionsNarration,
        TaskKind::UseEventActions,
        TaskKind::UseEventActionsNarration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::AddCharacterCarrying => "AddCharacterCarrying",
            TaskKind::AddCharacterDescription => "AddCharacterDescription",
            TaskKind::AddCharacterPersona => "AddCharacterPersona",
            TaskKind::AddCharacter => "AddCharacter",
            TaskKind::AddCharacterWearing => "AddCharacterWearing",
            TaskKind::AddCharacterWielding => "AddCharacterWielding",
            TaskKind::AddObjectContains => "AddObjectContains",
            TaskKind::AddObjectDescription => "AddObjectDescription",
            TaskKind::AddObject => "AddObject",
            TaskKind::ObjectsAttributes => "ObjectsAttributes",
            TaskKind::RoomBackstory => "RoomBackstory",
            TaskKind::RoomDescription => "RoomDescription",
            TaskKind::GameActions => "GameActions",
            TaskKind::GameActionsNarration => "GameActionsNarration",
            TaskKind::InvalidSelfPlay => "InvalidSelfPlay",
            TaskKind::InvalidSelfPlayNarration => "InvalidSelfPlayNarration",
            TaskKind::SelfPlayActions => "SelfPlayActions",
            TaskKind::SelfPlayActionsNarration => "SelfPlayActionsNarration",
            TaskKind::UseEventActions => "UseEventActions",
            TaskKind::UseEventActionsNarration => "UseEventActionsNarration",
        }
    }

    pub fn label_grammar(self) -> LabelGrammar {
        match self {
            TaskKind::GameActions
            | TaskKind::InvalidSelfPlay
            | TaskKind::SelfPlayActions
            | TaskKind::UseEventActions => LabelGrammar::Delta,
            TaskKind::GameActionsNarration
            | TaskKind::InvalidSelfPlayNarration
            | TaskKind::SelfPlayActionsNarration
            | TaskKind::UseEventActionsNarration
            | TaskKind::RoomBackstory
            | TaskKind::RoomDescription => LabelGrammar::FreeText,
            _ => LabelGrammar::Triples,
        }
    }

    pub fn is_graph_update(self) -> bool {
        self.label_grammar() == LabelGrammar::Delta
    }

    pub fn is_narration(self) -> bool {
        matches!(
            self,
            TaskKind::GameActionsNarration
                | TaskKind::InvalidSelfPlayNarration
                | TaskKind::SelfPlayActionsNarration
                | TaskKind::UseEventActionsNarration
        )
    }

    /// Action tasks derive from an executed action; the rest from a static world.
    pub fn is_action(self) -> bool {
        self.is_graph_update() || self.is_narration()
    }

    pub fn is_use_event(self) -> bool {
        matches!(self, TaskKind::UseEventActions | TaskKind::UseEventActionsNarration)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TaskError::InvalidConfig(format!("unknown task `{s}`")))
    }
}

/// Where an example came from, sufficient to regenerate its gold label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub world: String,
    /// Actions replayed from the initial world before this example.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prior: Vec<PlaythroughStep>,
    /// Index into the UseEvent corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<String>,
    /// Canonical action text, or the UseEvent phrase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// The element or room an environment task is about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskExample {
    pub task: TaskKind,
    pub input: String,
    pub label: String,
    pub seed: u64,
    pub provenance: Provenance,
}

impl TaskExample {
    /// The final input line.
    pub fn prompt(&self) -> &str {
        self.input.rsplit('\n').next().unwrap_or("")
    }

    /// Stable identifier used by predictors and reports.
    pub fn id(&self) -> String {
        format!("{}-{:016x}", self.task, self.seed)
    }
}

pub fn write_examples(w: impl Write, examples: &[TaskExample]) -> Result<(), TaskError> {
    let mut w = BufWriter::new(w);
    for ex in examples {
        let line = serde_json::to_string(ex).map_err(|e| TaskError::Io(e.to_string()))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads JSONL examples. Blank lines are skipped; line numbers are 1-based.
pub fn read_examples(r: impl BufRead) -> Result<Vec<TaskExample>, TaskError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let violation = |message: String| TaskError::SchemaViolation { line: i + 1, message };
        let ex: TaskExample = serde_json::from_str(&line).map_err(|e| violation(e.to_string()))?;
        if ex.label.trim().is_empty() {
            return Err(violation("empty label".into()));
        }
        if ex.prompt().trim().is_empty() {
            return Err(violation("input does not end with a prompt line".into()));
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn export_dataset(examples: &[TaskExample], path: &Path) -> Result<(), TaskError> {
    let f = std::fs::File::create(path).map_err(|e| TaskError::Io(format!("{}: {e}", path.display())))?;
    write_examples(f, examples)
}

pub fn import_dataset(path: &Path) -> Result<Vec<TaskExample>, TaskError> {
    let f = std::fs::File::open(path).map_err(|e| TaskError::Io(format!("{}: {e}", path.display())))?;
    read_examples(BufReader::new(f))
}
