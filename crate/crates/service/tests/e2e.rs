use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tower::ServiceExt;
use worldgraph_core::engine::WorldFixture;
use worldgraph_core::eval::{aggregate_annotations, AnnotationRecord, PredictRequest, Prediction};
use worldgraph_core::graph::{apply_delta, parse_delta};
use worldgraph_core::tasks::GRAPH_HEADER;
use worldgraph_service::store::Store;
use worldgraph_service::{app, ServiceConfig};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/worlds")
}

fn config(store: &Path) -> ServiceConfig {
    let mut c = ServiceConfig::new(scenarios_dir(), store);
    c.narrator_timeout = Duration::from_secs(2);
    c
}

async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(router, method, uri, body).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("json body") };
    (status, value)
}

async fn call_raw(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn create(router: &Router, body: Value) -> String {
    let (status, v) = call(router, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn export(router: &Router, query: &str) -> Vec<Value> {
    let (status, bytes) = call_raw(router, "GET", &format!("/annotations/export{query}"), None).await;
    assert_eq!(status, StatusCode::OK);
    String::from_utf8(bytes).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    std::fs::read_to_string(path).unwrap().trim_end().to_string()
}

#[tokio::test]
async fn one_turn_session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();

    let (status, v) = call(&router, "GET", "/healthz", None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("ok")));
    let (_, scenarios) = call(&router, "GET", "/scenarios", None).await;
    assert_eq!(scenarios[0]["id"], "wizard_room");

    let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
    assert_eq!(id.len(), 32);
    let (status, view) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["actor"], "wizard");
    assert_eq!(view["persona"], "I am a wizard who studies the old books.");
    assert!(view["setting"].as_str().unwrap().contains("A round stone room lit by a single candle."));
    assert!(view.get("graph").is_none());
    assert_eq!(view["closed"], false);

    let (status, turn) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
    assert_eq!(status, StatusCode::OK, "{turn}");
    assert_eq!(turn["turn"], 1);
    assert_eq!(turn["narration"], "You get the staff.");
    assert_eq!(turn["delta_text"].as_str().unwrap().trim_end(), golden("delta_get_staff.txt"));
    assert_eq!(turn["degraded"], false);

    let (status, err) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "wield staff"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "SessionClosed");

    let (_, view) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(view["closed"], true);
    assert_eq!(view["turn"], 1);
    assert_eq!(view["turn_records"].as_array().unwrap().len(), 1);

    let ann = json!({"turn": 1, "inconsistent_action": false, "inconsistent_setting": true, "annotator_id": "a1"});
    let (status, stored) = call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
    assert_eq!(status, StatusCode::CREATED, "{stored}");
    assert_eq!(stored["example_id"], format!("{id}:1"));
    assert_eq!(stored["scenario_id"], "wizard_room");
}

#[tokio::test]
async fn invalid_action_keeps_world_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room", "mode": "free_play"})).await;
    let (_, before) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    let (status, turn) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "eat jar"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(turn["narration"], "You can't eat that!");
    assert_eq!(turn["delta_text"].as_str().unwrap().trim_end(), golden("delta_no_mutation.txt"));
    let (_, after) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(before["game_text"], after["game_text"]);
    assert_eq!(after["closed"], false);

    let (status, _) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, after) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(after["turn"], 2);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let (status, v) = call(&router, "POST", "/sessions", Some(json!({"scenario_id": "nowhere"}))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownScenario")));
    let (status, v) = call(&router, "GET", "/sessions/deadbeef/state", None).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownSession")));
    let (status, v) = call(&router, "POST", "/sessions/deadbeef/action", Some(json!({"action": "look"}))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownSession")));
    let (status, v) = call(&router, "POST", "/sessions", Some(json!({"scenario": "wizard_room"}))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("BadRequest")));
    let (status, _) = call(&router, "POST", "/sessions", Some(json!({"scenario_id": "wizard_room", "actor": "staff"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&router, "POST", "/sessions", Some(json!({"scenario_id": "wizard_room", "replay_steps": 99}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
    let ann = json!({"turn": 1, "inconsistent_action": true, "inconsistent_setting": false});
    let (status, v) = call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownTurn")));
    let (status, _) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_exposure_follows_the_session_flag() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let shown = create(&router, json!({"scenario_id": "wizard_room", "expose_graph": true})).await;
    let hidden = create(&router, json!({"scenario_id": "wizard_room"})).await;
    let (_, v) = call(&router, "GET", &format!("/sessions/{shown}/state"), None).await;
    assert!(v["graph"].as_str().unwrap().contains("staff IS_INSIDE room"));
    let (_, v) = call(&router, "GET", &format!("/sessions/{hidden}/state"), None).await;
    assert!(v.get("graph").is_none());
    assert!(!v.to_string().contains("IS_INSIDE"));
}

#[tokio::test]
async fn replayed_steps_and_chosen_actor() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room", "replay_steps": 1, "actor": "knight", "expose_graph": true})).await;
    let (_, v) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(v["actor"], "knight");
    assert!(v["graph"].as_str().unwrap().contains("wizard IS_CARRYING staff"));
    assert_eq!(v["turn"], 0);
}

#[tokio::test]
async fn sessions_ids_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let mut seen = HashSet::new();
    for _ in 0..10_000 {
        assert!(seen.insert(create(&router, json!({"scenario_id": "wizard_room"})).await));
    }
}

#[tokio::test]
async fn restart_preserves_sessions_and_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let (ids, exported, views) = {
        let router = app(config(dir.path())).unwrap();
        let mut ids = Vec::new();
        for (i, action) in ["get staff", "eat jar", "give coin to peasant", "get apple"].iter().enumerate() {
            let id = create(&router, json!({"scenario_id": "wizard_room", "mode": "free_play"})).await;
            call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": action}))).await;
            call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "wield staff"}))).await;
            for turn in 1..=2 {
                let ann = json!({"turn": turn, "inconsistent_action": i % 2 == 0, "inconsistent_setting": turn == 2, "annotator_id": "a"});
                let (status, _) = call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
                assert_eq!(status, StatusCode::CREATED);
            }
            ids.push(id);
        }
        let mut views = Vec::new();
        for id in &ids {
            views.push(call(&router, "GET", &format!("/sessions/{id}/state"), None).await.1);
        }
        (ids, export(&router, "").await, views)
    };
    assert_eq!(exported.len(), 8);

    let router = app(config(dir.path())).unwrap();
    assert_eq!(export(&router, "").await, exported);
    for (id, before) in ids.iter().zip(&views) {
        let (_, after) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
        assert_eq!(&after, before);
    }
    // The world survives too: actions continue from the persisted state.
    let (_, turn) = call(&router, "POST", &format!("/sessions/{}/action", ids[0]), Some(json!({"action": "drop staff"}))).await;
    assert_eq!(turn["narration"], "You drop the staff.");
    assert_eq!(turn["turn"], 3);
}

#[tokio::test]
async fn recovery_falls_back_to_replay_without_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let router = app(config(dir.path())).unwrap();
        let id = create(&router, json!({"scenario_id": "wizard_room", "mode": "free_play", "expose_graph": true})).await;
        call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
        call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "wield staff"}))).await;
        let view = call(&router, "GET", &format!("/sessions/{id}/state"), None).await.1;
        (id, view)
    };
    std::fs::remove_dir_all(dir.path().join("snapshots")).unwrap();
    let router = app(config(dir.path())).unwrap();
    let (_, after) = call(&router, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(after, before);
}

#[tokio::test]
async fn torn_annotation_line_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let router = app(config(dir.path())).unwrap();
        let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
        call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
        let ann = json!({"turn": 1, "inconsistent_action": false, "inconsistent_setting": false});
        call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
        id
    };
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().append(true).open(dir.path().join("annotations.jsonl")).unwrap();
    f.write_all(b"{\"record\":{\"example_id\":\"x").unwrap();
    drop(f);

    let router = app(config(dir.path())).unwrap();
    assert_eq!(export(&router, "").await.len(), 1);
    let ann = json!({"turn": 1, "inconsistent_action": true, "inconsistent_setting": false, "annotator_id": "b"});
    let (status, _) = call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
    assert_eq!(status, StatusCode::CREATED);
    drop(router);
    let router = app(config(dir.path())).unwrap();
    assert_eq!(export(&router, "").await.len(), 2);
}

#[tokio::test]
async fn resubmission_overwrites_per_annotator() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
    call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
    for (annotator, flag) in [("a", true), ("a", false), ("b", true)] {
        let ann = json!({"turn": 1, "inconsistent_action": flag, "inconsistent_setting": false, "annotator_id": annotator});
        call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
    }
    let rows = export(&router, "").await;
    assert_eq!(rows.len(), 2);
    let a = rows.iter().find(|r| r["annotator_id"] == "a").unwrap();
    assert_eq!(a["inconsistent_action"], false);
}

#[tokio::test]
async fn export_aggregates_like_direct_records_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    assert!(export(&router, "").await.is_empty());
    let flags: Vec<(bool, bool)> = (0..100).map(|i| (i % 5 == 0 || i % 5 == 2, i % 5 == 1 || i % 5 == 2)).collect();
    let mut ids = Vec::new();
    for &(action, setting) in &flags {
        let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
        call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get apple"}))).await;
        let ann = json!({"turn": 1, "inconsistent_action": action, "inconsistent_setting": setting});
        call(&router, "POST", &format!("/sessions/{id}/annotations"), Some(ann)).await;
        ids.push(id);
    }
    let rows = export(&router, "?scenario=wizard_room").await;
    let exported: Vec<AnnotationRecord> = rows.iter().map(|r| serde_json::from_value(r.clone()).unwrap()).collect();
    let direct: Vec<AnnotationRecord> = flags
        .iter()
        .map(|&(a, s)| AnnotationRecord {
            example_id: String::new(),
            inconsistent_action: a,
            inconsistent_setting: s,
            annotator_id: String::new(),
            timestamp: chrono::Utc::now(),
        })
        .collect();
    let got = aggregate_annotations(&exported).unwrap();
    assert_eq!(got, aggregate_annotations(&direct).unwrap());
    assert_eq!((got.inconsistent_action, got.inconsistent_setting, got.all_good), (0.4, 0.4, 0.4));

    let stamps: Vec<&str> = rows.iter().map(|r| r["timestamp"].as_str().unwrap()).collect();
    let mut sorted = stamps.clone();
    sorted.sort();
    assert_eq!(stamps, sorted);

    assert!(export(&router, "?scenario=elsewhere").await.is_empty());
    let one = export(&router, &format!("?session={}", ids[2])).await;
    assert_eq!(one.len(), 1);
    assert_eq!(one[0]["session_id"], ids[2]);
}

#[tokio::test]
async fn snapshots_equal_initial_world_plus_recorded_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room", "mode": "free_play"})).await;
    let fixture = WorldFixture::load(&scenarios_dir().join("wizard_room.json")).unwrap();
    let mut graph = fixture.build().unwrap().graph;
    let store = Store::open(dir.path()).unwrap();
    for action in ["get staff", "wield staff", "eat jar", "get apple", "eat apple", "go hallway", "get rug"] {
        let (_, turn) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": action}))).await;
        graph = apply_delta(&graph, &parse_delta(turn["delta_text"].as_str().unwrap()).unwrap()).unwrap();
        let snap = store.read_snapshot(&id).unwrap().unwrap();
        assert_eq!(snap.turn, turn["turn"].as_u64().unwrap() as u32);
        // History triples ride along in the world but never appear in deltas.
        assert_eq!(snap.world.graph.state_triples(), graph.state_triples(), "after `{action}`");
    }
}

async fn spawn_predictor(seen: Arc<Mutex<Vec<PredictRequest>>>) -> String {
    let handler = move |Json(req): Json<PredictRequest>| {
        let seen = seen.clone();
        async move {
            let reply = Prediction { example_id: req.example_id.clone(), text: "The staff hums.".into(), token_logprobs: None };
            seen.lock().unwrap().push(req);
            Json(reply)
        }
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, Router::new().route("/predict", post(handler))).await.unwrap() });
    format!("http://{addr}/predict")
}

#[tokio::test(flavor = "multi_thread")]
async fn external_narrator_gets_prose_only_input() {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let url = spawn_predictor(seen.clone()).await;
    let dir = tempfile::tempdir().unwrap();
    let router = app(config(dir.path())).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room", "narrator": format!("url={url}")})).await;
    let (status, turn) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
    assert_eq!(status, StatusCode::OK, "{turn}");
    assert_eq!(turn["narration"], "The staff hums.");
    assert_eq!(turn["degraded"], false);
    assert_eq!(turn["delta_text"].as_str().unwrap().trim_end(), golden("delta_get_staff.txt"));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].example_id, format!("{id}:1"));
    assert!(!seen[0].input.contains(GRAPH_HEADER), "{}", seen[0].input);
    assert!(seen[0].input.contains("get staff"));
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_narrator_degrades_to_engine() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    // Bound then released, so nothing listens there.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    cfg.narrator = format!("url=http://127.0.0.1:{port}/predict").parse().unwrap();
    let router = app(cfg).unwrap();
    let id = create(&router, json!({"scenario_id": "wizard_room"})).await;
    let (status, turn) = call(&router, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "get staff"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(turn["degraded"], true);
    assert_eq!(turn["narration"], "You get the staff.");
}
