//! Wire types of the HTTP interface. The same records are persisted to the
//! store logs.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use worldgraph_core::engine::Validity;
use worldgraph_core::eval::AnnotationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Exactly one action, then read-only pending annotation.
    #[default]
    OneTurnEval,
    FreePlay,
}

/// Who writes the narration of each turn. Text form: `engine` or `url=<endpoint>`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NarratorSpec {
    #[default]
    EngineOracle,
    /// A predictor speaking the protocol over HTTP POST.
    External(String),
}

impl FromStr for NarratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "engine" {
            return Ok(NarratorSpec::EngineOracle);
        }
        match s.strip_prefix("url=") {
            Some(url) if url.starts_with("http://") || url.starts_with("https://") => {
                Ok(NarratorSpec::External(url.to_string()))
            }
            _ => Err(format!("narrator must be `engine` or `url=http://...`, got `{s}`")),
        }
    }
}

impl TryFrom<String> for NarratorSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NarratorSpec> for String {
    fn from(n: NarratorSpec) -> String {
        n.to_string()
    }
}

impl fmt::Display for NarratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NarratorSpec::EngineOracle => f.write_str("engine"),
            NarratorSpec::External(url) => write!(f, "url={url}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub scenario_id: String,
    #[serde(default)]
    pub mode: SessionMode,
    /// Defaults to the service-wide narrator.
    #[serde(default)]
    pub narrator: Option<NarratorSpec>,
    /// Defaults to the scenario's player, else its first character.
    #[serde(default)]
    pub actor: Option<String>,
    #[serde(default)]
    pub expose_graph: bool,
    /// Leading steps of the scenario's recorded playthrough to replay first.
    #[serde(default)]
    pub replay_steps: usize,
}

/// Persisted once per session in `sessions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub scenario_id: String,
    pub mode: SessionMode,
    pub narrator: NarratorSpec,
    pub actor: String,
    pub expose_graph: bool,
    pub replay_steps: usize,
    pub created_at: DateTime<Utc>,
}

/// One executed action. Append-only; `delta_text` always parses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: String,
    /// 1-based.
    pub turn: u32,
    pub action_text: String,
    pub narration: String,
    pub delta_text: String,
    pub validity: Validity,
    pub narrator: NarratorSpec,
    /// The external narrator failed and the engine narration was used.
    pub degraded: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub scenario_id: String,
    pub mode: SessionMode,
    pub actor: String,
    pub turn: u32,
    /// No further actions are accepted.
    pub closed: bool,
    pub persona: Option<String>,
    pub setting: Option<String>,
    pub game_text: String,
    /// Present only for sessions created with `expose_graph`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    pub turn_records: Vec<TurnRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    pub turn: u32,
    pub inconsistent_action: bool,
    pub inconsistent_setting: bool,
    #[serde(default = "anonymous")]
    pub annotator_id: String,
}

fn anonymous() -> String {
    "anonymous".to_string()
}

/// An annotation as persisted and exported. Readers expecting a plain
/// [`AnnotationRecord`] ignore the extra fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredAnnotation {
    #[serde(flatten)]
    pub record: AnnotationRecord,
    pub session_id: String,
    pub scenario_id: String,
    pub turn: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub scenario: Option<String>,
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub player: Option<String>,
    pub rooms: Vec<String>,
    pub characters: Vec<String>,
    pub playthrough_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}
