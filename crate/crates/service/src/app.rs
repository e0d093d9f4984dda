use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::json;
use worldgraph_core::engine::{act, load_fixture_dir, render_game_text, World, WorldFixture};
use worldgraph_core::eval::{AnnotationRecord, PredictRequest};
use worldgraph_core::graph::{serialize_delta, serialize_graph, EdgeLabel, NodeKind};
use worldgraph_core::tasks::{
    assemble_context, narration_prompt, ContextConfig, DropoutConfig, GraphContextSetting, View,
};

use crate::api::{
    ActionRequest, AnnotationRequest, CreateSessionRequest, ExportFilter, NarratorSpec, ScenarioSummary,
    SessionInfo, SessionMode, SessionView, StoredAnnotation, TurnRecord,
};
use crate::error::ServiceError;
use crate::narrator::request_narration;
use crate::store::{Snapshot, Store, ANNOTATIONS_LOG, SESSIONS_LOG, TURNS_LOG};

/// Environment variable that overrides the configured store directory.
pub const STORE_ENV: &str = "WORLDGRAPH_STORE";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub scenarios_dir: PathBuf,
    pub store_dir: PathBuf,
    /// Narrator for sessions that do not name one.
    pub narrator: NarratorSpec,
    pub narrator_timeout: Duration,
    /// Probability of omitting the graph block from external narrator
    /// inputs. 1.0 sends prose only.
    pub external_graph_drop: f64,
}

impl ServiceConfig {
    pub fn new(scenarios_dir: impl Into<PathBuf>, store_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            scenarios_dir: scenarios_dir.into(),
            store_dir: store_dir.into(),
            narrator: NarratorSpec::EngineOracle,
            narrator_timeout: Duration::from_secs(10),
            external_graph_drop: 1.0,
        }
    }

    /// Applies the `WORLDGRAPH_STORE` override, if set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(STORE_ENV).filter(|d| !d.is_empty()) {
            self.store_dir = PathBuf::from(dir);
        }
        self
    }
}

struct Session {
    info: SessionInfo,
    world: World,
    turns: Vec<TurnRecord>,
}

impl Session {
    fn closed(&self) -> bool {
        self.info.mode == SessionMode::OneTurnEval && !self.turns.is_empty()
    }

    /// Runs one action against the current world. The world is replaced
    /// only by the caller, and only for valid outcomes.
    fn step(&self, text: &str) -> Result<(World, worldgraph_core::engine::ExecutionResult), ServiceError> {
        let mut after = self.world.clone();
        let result = act(&mut after, &self.info.actor, text)?;
        Ok((after, result))
    }

    fn view(&self) -> SessionView {
        let actor = &self.info.actor;
        let g = &self.world.graph;
        let setting = self.world.room_of(actor).map(|room| {
            let mut parts = vec![room.to_string()];
            parts.extend(g.value_of(room, EdgeLabel::HasDescription).map(str::to_string));
            parts.extend(g.value_of(room, EdgeLabel::HasBackstory).map(str::to_string));
            parts.join("\n")
        });
        SessionView {
            session_id: self.info.session_id.clone(),
            scenario_id: self.info.scenario_id.clone(),
            mode: self.info.mode,
            actor: actor.clone(),
            turn: self.turns.len() as u32,
            closed: self.closed(),
            persona: g.value_of(actor, EdgeLabel::HasPersona).map(str::to_string),
            setting,
            game_text: render_game_text(&self.world, actor).text,
            graph: self.info.expose_graph.then(|| serialize_graph(g)),
            turn_records: self.turns.clone(),
        }
    }
}

/// Effective annotations: later submissions for the same (session, turn,
/// annotator) replace earlier ones.
#[derive(Default)]
struct Annotations {
    entries: Vec<StoredAnnotation>,
    by_key: HashMap<(String, u32, String), usize>,
}

impl Annotations {
    fn upsert(&mut self, a: StoredAnnotation) {
        let key = (a.session_id.clone(), a.turn, a.record.annotator_id.clone());
        match self.by_key.get(&key) {
            Some(&i) => self.entries[i] = a,
            None => {
                self.by_key.insert(key, self.entries.len());
                self.entries.push(a);
            }
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    scenarios: BTreeMap<String, WorldFixture>,
    store: Store,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    /// Held across the annotation log append, which serializes annotation writes.
    annotations: Mutex<Annotations>,
    http: reqwest::Client,
}

fn initial_world(fixture: &WorldFixture, replay_steps: usize) -> Result<World, ServiceError> {
    let mut world = fixture.build()?;
    for step in fixture.playthrough.iter().take(replay_steps) {
        act(&mut world, &step.actor, &step.action)?;
    }
    Ok(world)
}

/// Re-executes recorded turns, adopting valid outcomes as the live path does.
fn replay_turns(world: &mut World, actor: &str, turns: &[TurnRecord]) -> Result<(), ServiceError> {
    for t in turns {
        let mut after = world.clone();
        if act(&mut after, actor, &t.action_text)?.validity.is_valid() {
            *world = after;
        }
    }
    Ok(())
}

impl AppState {
    /// Loads scenarios and restores every persisted session.
    pub fn open(config: ServiceConfig) -> Result<Arc<AppState>, ServiceError> {
        let scenarios: BTreeMap<String, WorldFixture> = load_fixture_dir(&config.scenarios_dir)?
            .into_iter()
            .map(|f| (f.id.clone(), f))
            .collect();
        let store = Store::open(&config.store_dir)?;
        let recovered = store.recover()?;

        let mut turns_by: HashMap<String, Vec<TurnRecord>> = HashMap::new();
        for t in recovered.turns {
            turns_by.entry(t.session_id.clone()).or_default().push(t);
        }
        let mut sessions = HashMap::new();
        for info in recovered.sessions {
            let turns = turns_by.remove(&info.session_id).unwrap_or_default();
            let world = match store.read_snapshot(&info.session_id)? {
                Some(snap) if snap.turn as usize <= turns.len() => {
                    let mut world = snap.world;
                    replay_turns(&mut world, &info.actor, &turns[snap.turn as usize..])?;
                    world
                }
                _ => {
                    let fixture = scenarios
                        .get(&info.scenario_id)
                        .ok_or_else(|| ServiceError::UnknownScenario(info.scenario_id.clone()))?;
                    let mut world = initial_world(fixture, info.replay_steps)?;
                    replay_turns(&mut world, &info.actor, &turns)?;
                    world
                }
            };
            let id = info.session_id.clone();
            sessions.insert(id, Arc::new(tokio::sync::Mutex::new(Session { info, world, turns })));
        }
        for orphan in turns_by.keys() {
            log::warn!("turn records for unknown session `{orphan}` ignored");
        }
        let mut annotations = Annotations::default();
        for a in recovered.annotations {
            annotations.upsert(a);
        }
        log::info!(
            "store {}: {} sessions, {} annotations restored",
            config.store_dir.display(),
            sessions.len(),
            annotations.entries.len()
        );
        Ok(Arc::new(AppState {
            config,
            scenarios,
            store,
            sessions: RwLock::new(sessions),
            annotations: Mutex::new(annotations),
            http: reqwest::Client::new(),
        }))
    }

    pub fn store_dir(&self) -> &Path {
        self.store.dir()
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// Narration from the external predictor, or the engine's with
    /// `degraded` set when the predictor fails.
    async fn external_narration(
        &self,
        url: &str,
        session: &Session,
        turn: u32,
        text: &str,
        engine_narration: &str,
    ) -> (String, bool) {
        let actor = &session.info.actor;
        let config = ContextConfig {
            dropout: DropoutConfig::zero(),
            graph_setting: GraphContextSetting::free(self.config.external_graph_drop).ok(),
            ..Default::default()
        };
        let mut rng = StdRng::seed_from_u64(session.world.rng_seed ^ u64::from(turn));
        let prompt = narration_prompt(actor, actor, text);
        let input = match assemble_context(&session.world, &View::Character(actor.clone()), &prompt, &BTreeSet::new(), &config, &mut rng) {
            Ok(ctx) => ctx.text,
            Err(e) => {
                log::warn!("cannot assemble narrator context: {e}");
                return (engine_narration.to_string(), true);
            }
        };
        let request = PredictRequest { example_id: format!("{}:{turn}", session.info.session_id), input };
        match request_narration(&self.http, url, &request, self.config.narrator_timeout).await {
            Ok(p) => (p.text, false),
            Err(reason) => {
                log::warn!("external narrator {url} failed, using engine narration: {reason}");
                (engine_narration.to_string(), true)
            }
        }
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn healthz() -> impl IntoResponse {
    Json(json!({ "status": "ok" }))
}

async fn list_scenarios(State(state): State<Arc<AppState>>) -> Json<Vec<ScenarioSummary>> {
    Json(
        state
            .scenarios
            .values()
            .map(|f| ScenarioSummary {
                id: f.id.clone(),
                player: f.player.clone(),
                rooms: f.rooms.iter().map(|r| r.name.clone()).collect(),
                characters: f.characters.iter().map(|c| c.name.clone()).collect(),
                playthrough_steps: f.playthrough.len(),
            })
            .collect(),
    )
}

/// 128 bits from the thread-local CSPRNG, as lowercase hex.
fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ServiceError> {
    let req = body(payload)?;
    let fixture = state
        .scenarios
        .get(&req.scenario_id)
        .ok_or_else(|| ServiceError::UnknownScenario(req.scenario_id.clone()))?;
    if req.replay_steps > fixture.playthrough.len() {
        return Err(ServiceError::BadRequest(format!(
            "scenario `{}` has only {} playthrough steps",
            fixture.id,
            fixture.playthrough.len()
        )));
    }
    let world = initial_world(fixture, req.replay_steps)?;
    let actor = req
        .actor
        .clone()
        .or_else(|| fixture.player.clone())
        .or_else(|| world.actors().first().map(|n| n.display_name.clone()))
        .ok_or_else(|| ServiceError::BadRequest(format!("scenario `{}` has no characters", fixture.id)))?;
    if !world.is_kind(&actor, NodeKind::Character) || world.room_of(&actor).is_none() {
        return Err(ServiceError::BadRequest(format!("`{actor}` is not a placed character")));
    }
    let info = SessionInfo {
        session_id: new_session_id(),
        scenario_id: fixture.id.clone(),
        mode: req.mode,
        narrator: req.narrator.unwrap_or_else(|| state.config.narrator.clone()),
        actor,
        expose_graph: req.expose_graph,
        replay_steps: req.replay_steps,
        created_at: Utc::now(),
    };
    state.store.append(SESSIONS_LOG, &info)?;
    state.store.write_snapshot(&Snapshot { session_id: info.session_id.clone(), turn: 0, world: world.clone() })?;
    let session = Session { info, world, turns: Vec::new() };
    let view = session.view();
    state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(view.session_id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_state(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ServiceError> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.view()))
}

async fn post_action(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<TurnRecord>, ServiceError> {
    let session = state.session(&id)?;
    let req = body(payload)?;
    let text = req.action.trim();
    if text.is_empty() {
        return Err(ServiceError::BadRequest("empty action".into()));
    }
    let mut s = session.lock().await;
    if s.closed() {
        return Err(ServiceError::SessionClosed(id));
    }
    let turn = s.turns.len() as u32 + 1;
    let (after, result) = s.step(text)?;
    let (narration, degraded) = match &s.info.narrator {
        NarratorSpec::EngineOracle => (result.narration.clone(), false),
        NarratorSpec::External(url) => state.external_narration(url, &s, turn, text, &result.narration).await,
    };
    let record = TurnRecord {
        session_id: id.clone(),
        turn,
        action_text: text.to_string(),
        narration,
        delta_text: serialize_delta(&result.delta),
        validity: result.validity.clone(),
        narrator: s.info.narrator.clone(),
        degraded,
        created_at: Utc::now(),
    };
    // The turn is durable before the in-memory world moves.
    state.store.append(TURNS_LOG, &record)?;
    if result.validity.is_valid() {
        s.world = after;
    }
    s.turns.push(record.clone());
    state.store.write_snapshot(&Snapshot { session_id: id, turn, world: s.world.clone() })?;
    Ok(Json(record))
}

async fn post_annotation(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<AnnotationRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<StoredAnnotation>), ServiceError> {
    let session = state.session(&id)?;
    let req = body(payload)?;
    let scenario_id = {
        let s = session.lock().await;
        if req.turn == 0 || req.turn as usize > s.turns.len() {
            return Err(ServiceError::UnknownTurn { session: id, turn: req.turn });
        }
        s.info.scenario_id.clone()
    };
    let stored = StoredAnnotation {
        record: AnnotationRecord {
            example_id: format!("{id}:{}", req.turn),
            inconsistent_action: req.inconsistent_action,
            inconsistent_setting: req.inconsistent_setting,
            annotator_id: req.annotator_id,
            timestamp: Utc::now(),
        },
        session_id: id,
        scenario_id,
        turn: req.turn,
    };
    let mut annotations = state.annotations.lock().unwrap_or_else(|p| p.into_inner());
    state.store.append(ANNOTATIONS_LOG, &stored)?;
    annotations.upsert(stored.clone());
    Ok((StatusCode::CREATED, Json(stored)))
}

/// Effective annotations matching `filter`, ordered by timestamp. Ties keep
/// submission order.
pub fn export_lines(state: &AppState, filter: &ExportFilter) -> Vec<StoredAnnotation> {
    let annotations = state.annotations.lock().unwrap_or_else(|p| p.into_inner());
    let mut out: Vec<StoredAnnotation> = annotations
        .entries
        .iter()
        .filter(|a| filter.scenario.as_ref().is_none_or(|s| &a.scenario_id == s))
        .filter(|a| filter.session.as_ref().is_none_or(|s| &a.session_id == s))
        .cloned()
        .collect();
    out.sort_by_key(|a| a.record.timestamp);
    out
}

async fn export_annotations(
    State(state): State<Arc<AppState>>,
    Query(filter): Query<ExportFilter>,
) -> impl IntoResponse {
    let body: String = export_lines(&state, &filter)
        .iter()
        .map(|a| serde_json::to_string(a).expect("annotation serializes") + "\n")
        .collect();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/action", post(post_action))
        .route("/sessions/{id}/annotations", post(post_annotation))
        .route("/annotations/export", get(export_annotations))
        .with_state(state)
}

/// Builds the router over a freshly opened store.
pub fn app(config: ServiceConfig) -> Result<Router, ServiceError> {
    Ok(router(AppState::open(config)?))
}

/// Serves until the listener fails.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let router = app(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_ids_are_distinct_hex() {
        let ids: std::collections::HashSet<String> = (0..10_000).map(|_| new_session_id()).collect();
        assert_eq!(ids.len(), 10_000);
        assert!(ids.iter().all(|id| id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit())));
    }
}
