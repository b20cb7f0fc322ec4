use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use deixis_cli::serve::{router, ServeState};
use deixis_cli::Config;
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Serves on an ephemeral port from a background runtime for the test's lifetime.
fn start(cfg: Config) -> SocketAddr {
    let state = Arc::new(ServeState::new(&cfg, Some(&fixtures().join("scenes"))).unwrap());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(state)).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn replay_config() -> Config {
    Config {
        transcripts: Some(fixtures().join("transcripts")),
        backend: Some("replay".into()),
        ontology: Some(fixtures().join("ontology.json")),
        ..Config::default()
    }
}

fn hand(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join("hands").join(name)).unwrap())
        .unwrap()
}

fn post(addr: SocketAddr, path: &str, body: Value) -> (u16, Value) {
    let r = reqwest::blocking::Client::new()
        .post(format!("http://{addr}{path}"))
        .json(&body)
        .send()
        .unwrap();
    (r.status().as_u16(), r.json().unwrap())
}

#[test]
fn health() {
    let addr = start(Config::default());
    let r = reqwest::blocking::get(format!("http://{addr}/v1/health")).unwrap();
    assert_eq!(r.status().as_u16(), 200);
}

#[test]
fn resolve_single_candidate_by_scene_name() {
    let addr = start(replay_config());
    let (status, body) = post(
        addr,
        "/v1/resolve",
        json!({"scene": "single", "hand": hand("point_mug.hand"), "target": "mug"}),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["referent"]["kind"], "object");
    assert_eq!(body["referent"]["value"]["label"], "mug");
}

#[test]
fn resolve_direction_of_a_downward_finger() {
    let addr = start(Config::default());
    let (status, body) = post(
        addr,
        "/v1/resolve",
        json!({"scene": "single", "hand": hand("point_down.hand"), "mode": "direction"}),
    );
    assert_eq!(status, 200, "{body}");
    let v: Vec<f64> = serde_json::from_value(body["referent"]["value"].clone()).unwrap();
    for (got, want) in v.iter().zip([0.0, 1.0, 0.0]) {
        assert!((got - want).abs() < 1e-9, "{v:?}");
    }
}

#[test]
fn resolve_errors_carry_codes() {
    let addr = start(Config::default());
    let (status, body) = post(
        addr,
        "/v1/resolve",
        json!({"scene": "single", "hand": hand("point_mug.hand"), "target": "drawer"}),
    );
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (422, Some("NO_CANDIDATES"))
    );
    let (status, body) = post(
        addr,
        "/v1/resolve",
        json!({"scene": "attic", "hand": hand("point_mug.hand"), "target": "mug"}),
    );
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (404, Some("UNKNOWN_SCENE"))
    );
}

#[test]
fn unseen_prompt_is_a_transcript_miss() {
    let addr = start(replay_config());
    let instruction = json!({"speech_text": "juggle the oranges", "gesture": {"kind": "label", "value": "pointing"}});
    let (status, body) = post(addr, "/v1/plan", json!({"instruction": instruction}));
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (404, Some("TRANSCRIPT_MISS")),
        "{body}"
    );
}

#[test]
fn rule_plan_is_valid_and_needs_a_gesture() {
    let addr = start(replay_config());
    let instruction = json!({"speech_text": "give me that tool", "gesture": {"kind": "label", "value": "pointing"}});
    let (status, body) = post(
        addr,
        "/v1/plan",
        json!({"instruction": instruction, "backend": "rule"}),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["valid"], true);
    assert_eq!(body["requires_gesture"], true);
    assert!(body["program"]
        .as_str()
        .unwrap()
        .contains("detect_referred_obj_pos('tool')"));
}
