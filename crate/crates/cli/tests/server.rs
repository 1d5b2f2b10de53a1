use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use proptest::prelude::*;
use serde_json::{json, Value};
use tower::ServiceExt;

use lookahead_cli::server::router;
use lookahead_core::chat::ChatEngine;
use lookahead_core::corpus::{read_corpus, DialogueSession, Vocabulary};
use lookahead_core::model::{Model, ModelConfig};

/// The toy vocabulary has no farewell token, so only the human can end a session.
fn toy_model() -> Model {
    let vocab = Vocabulary::build_from_texts(["hello may i book a table bar yes no ok please"], 1);
    let config = ModelConfig {
        embed_dim: 6,
        goal_hidden: 4,
        hidden: 8,
        lookahead_k: 2,
        max_decode_len: 6,
        init_scale: 0.5,
        ..ModelConfig::default()
    };
    Model::new(config, vocab, 12).unwrap()
}

fn app(seed: u64) -> Router {
    router(Arc::new(ChatEngine::new(Arc::new(toy_model()), seed)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn create(app: &Router, goals: Value) -> String {
    let (status, body) = call(app, Method::POST, "/session", Some(&json!({ "goals": goals }).to_string())).await;
    assert_eq!(status, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_and_model_info() {
    let app = app(0);
    let (status, body) = call(&app, Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "ok");
    let (status, info) = call(&app, Method::GET, "/model/info", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["k"], 2);
    assert_eq!(info["dims"]["hidden"], 8);
    assert_eq!(info["vocab_size"], 15);
    assert_eq!(info["version"], 1);
    assert_eq!(info["human_goal_labels"].as_array().unwrap().len(), 6);
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app(1);
    let id = create(&app, json!([1, 0, 0, 0, 0, 0])).await;
    let (status, s) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["goals"], json!([1, 0, 0, 0, 0, 0]));
    assert_eq!(s["status"], "open");

    let uri = format!("/session/{id}/message");
    let (status, r) = call(&app, Method::POST, &uri, Some(r#"{"text": "may i book a table please"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(r["reply"].is_string());
    let p = r["done_prob"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let (status, r) = call(&app, Method::POST, &uri, Some(r#"{"text": "ok bye"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["status"], "ended");
    let (status, _) = call(&app, Method::POST, &uri, Some(r#"{"text": "hello"}"#)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, s) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    assert_eq!(s["status"], "ended");
    assert_eq!(s["turns"].as_array().unwrap().len(), 4);
    assert_eq!(s["turns"][0]["speaker"], "A");
    assert_eq!(s["turns"][1]["speaker"], "B");

    // exporting needs a mark
    let export = format!("/session/{id}/export");
    assert_eq!(call(&app, Method::GET, &export, None).await.0, StatusCode::CONFLICT);
    let (status, _) = call(&app, Method::POST, &format!("/session/{id}/end"), Some(r#"{"outcome": "achieved"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    let (status, record) = call(&app, Method::GET, &export, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(record["outcome"], 1);
    let parsed = read_corpus(format!("{record}\n").as_bytes()).unwrap();
    assert_eq!(parsed.len(), 1);
    assert_eq!(parsed[0].turns.len(), 4);
}

#[tokio::test]
async fn error_statuses() {
    let app = app(2);
    assert_eq!(call(&app, Method::GET, "/session/missing", None).await.0, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::POST, "/session/missing/message", Some(r#"{"text": "hi"}"#)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::POST, "/session", Some("{not json")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, "/session", Some(r#"{"goals": [1, 2, 0, 0, 0, 0]}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, "/session", Some(r#"{"goals": [1, 0]}"#)).await.0, StatusCode::BAD_REQUEST);
    let id = create(&app, json!([0, 1, 0, 1, 0, 1])).await;
    let uri = format!("/session/{id}/message");
    assert_eq!(call(&app, Method::POST, &uri, Some(r#"{"txt": "hi"}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, &uri, Some(r#"{"text": ""}"#)).await.0, StatusCode::BAD_REQUEST);
    // sampled goals when the body is empty
    let (status, s) = call(&app, Method::POST, "/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(s["human_goals"].as_array().unwrap().len(), 6);
}

/// Transcript of one session driven alone.
fn solo(lines: &[&str]) -> Vec<(String, String)> {
    let engine = ChatEngine::new(Arc::new(toy_model()), 0);
    let id = engine.create(Some(goal()), Some(goal())).unwrap().id;
    for l in lines {
        if engine.message(&id, l).is_err() {
            break;
        }
    }
    turns(&engine.get(&id).unwrap().turns)
}

fn goal() -> lookahead_core::corpus::GoalVector {
    lookahead_core::corpus::GoalVector::from_bits(&[1, 0, 1, 0, 0, 1]).unwrap()
}

fn turns(t: &[lookahead_core::corpus::Turn]) -> Vec<(String, String)> {
    t.iter().map(|t| (format!("{:?}", t.speaker), t.text.clone())).collect()
}

const LINES: [&str; 4] = ["hello", "may i book a table", "no bar please", "yes ok"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interleaved_sessions_do_not_share_state(order in proptest::collection::vec(any::<bool>(), 8)) {
        let a_lines = &LINES[..];
        let b_lines = ["table please", "bye"];
        let engine = Arc::new(ChatEngine::new(Arc::new(toy_model()), 0));
        let a = engine.create(Some(goal()), Some(goal())).unwrap().id;
        let b = engine.create(Some(goal()), Some(goal())).unwrap().id;
        let (mut ia, mut ib) = (0, 0);
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let app = router(engine.clone());
        for pick_a in order {
            let (id, line) = if pick_a && ia < a_lines.len() {
                ia += 1;
                (&a, a_lines[ia - 1])
            } else if ib < b_lines.len() {
                ib += 1;
                (&b, b_lines[ib - 1])
            } else {
                continue;
            };
            let body = json!({ "text": line }).to_string();
            rt.block_on(call(&app, Method::POST, &format!("/session/{id}/message"), Some(&body)));
        }
        prop_assert_eq!(turns(&engine.get(&a).unwrap().turns), solo(&a_lines[..ia]));
        prop_assert_eq!(turns(&engine.get(&b).unwrap().turns), solo(&b_lines[..ib]));
    }
}

#[test]
fn concurrent_requests_from_threads() {
    let engine = Arc::new(ChatEngine::new(Arc::new(toy_model()), 0));
    let ids: Vec<String> = (0..4).map(|_| engine.create(Some(goal()), Some(goal())).unwrap().id).collect();
    std::thread::scope(|s| {
        for id in &ids {
            let engine = engine.clone();
            s.spawn(move || {
                for l in LINES {
                    if engine.message(id, l).is_err() {
                        break;
                    }
                }
            });
        }
    });
    let want = solo(&LINES);
    for id in &ids {
        assert_eq!(turns(&engine.get(id).unwrap().turns), want);
    }
}

#[test]
fn exported_record_type_is_the_corpus_type() {
    let s: DialogueSession = serde_json::from_value(json!({
        "goals_a": [1, 0, 0, 0, 0, 0],
        "goals_b": [0, 0, 0, 0, 0, 0],
        "turns": [{"speaker": "A", "text": "hello"}, {"speaker": "B", "text": "ok"}],
        "outcome": 0
    }))
    .unwrap();
    s.validate().unwrap();
}
