//! HTTP session API driven in-process.

mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hiercrs::service::http::{router, AppState, DEFAULT_TTL};
use hiercrs::service::run_script;
use hiercrs::{Mode, SystemResponse};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(ttl: Duration) -> Router {
    router(AppState::new(Arc::new(common::genre_shift_engine()), ttl))
}

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn open(app: &Router, mode: &str) -> String {
    let (status, body) = call(app, "POST", "/session", &json!({ "mode": mode }).to_string()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["mode"], mode);
    body["id"].as_str().unwrap().to_owned()
}

async fn say(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/session/{id}/utterance"), &json!({ "text": text }).to_string()).await
}

#[tokio::test]
async fn create_converse_inspect_delete() {
    let app = app(DEFAULT_TTL);
    let (status, health) = call(&app, "GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["status"], "ok");

    let id = open(&app, "hierarchical").await;
    let (status, reply) = say(&app, &id, "i love to watch funny movies").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reply["act"], "Recommend");
    assert_eq!(reply["tree"]["act"], "Recommend");
    assert!(!reply["system_text"].as_str().unwrap().is_empty());
    assert!(reply["diagnostics"]["portrait"]["weights"].is_array());
    assert!(reply["diagnostics"]["top_categories"].is_array());

    let (status, state) = call(&app, "GET", &format!("/session/{id}/state"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["turns"].as_array().unwrap().len(), 2);

    let (status, _) = call(&app, "DELETE", &format!("/session/{id}"), "").await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, "GET", &format!("/session/{id}/state"), "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "DELETE", &format!("/session/{id}"), "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn default_mode_when_body_is_empty() {
    let app = app(DEFAULT_TTL);
    let (status, body) = call(&app, "POST", "/session", "").await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["mode"], "hierarchical");
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = app(DEFAULT_TTL);
    assert_eq!(call(&app, "GET", "/session/bogus/state", "").await.0, StatusCode::NOT_FOUND);
    assert_eq!(say(&app, "bogus", "hello").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = app(DEFAULT_TTL);
    assert_eq!(call(&app, "POST", "/session", "{not json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/session", r#"{"mode":"sideways"}"#).await.0, StatusCode::BAD_REQUEST);
    let id = open(&app, "baseline").await;
    let uri = format!("/session/{id}/utterance");
    assert_eq!(call(&app, "POST", &uri, r#"{"txt":"hi"}"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", &uri, "").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let app = app(Duration::from_millis(50));
    let id = open(&app, "baseline").await;
    assert_eq!(say(&app, &id, "i love to watch funny movies").await.0, StatusCode::OK);
    tokio::time::sleep(Duration::from_millis(120)).await;
    assert_eq!(say(&app, &id, "yes, i love adam sandler").await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/session/{id}/state"), "").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn interleaved_sessions_stay_isolated() {
    let app = app(DEFAULT_TTL);
    let a = open(&app, "hierarchical").await;
    let b = open(&app, "hierarchical").await;
    let other = ["i like some scary movie", "something evil please", "i like some scary movie"];
    let mut from_a = Vec::new();
    for (mine, theirs) in common::GENRE_SHIFT_SCRIPT.iter().zip(other) {
        from_a.push(say(&app, &a, mine).await.1);
        say(&app, &b, theirs).await;
    }
    let engine = common::genre_shift_engine();
    let alone = run_script(&engine, Mode::Hierarchical, &common::GENRE_SHIFT_SCRIPT).unwrap();
    for (http, direct) in from_a.iter().zip(&alone) {
        assert_eq!(http, &serde_json::to_value(direct).unwrap());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_stay_isolated() {
    let app = app(DEFAULT_TTL);
    let mut tasks = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let mode = if i % 2 == 0 { "baseline" } else { "hierarchical" };
            let id = open(&app, mode).await;
            let mut replies = Vec::new();
            for line in common::GENRE_SHIFT_SCRIPT {
                replies.push(say(&app, &id, line).await.1);
                tokio::task::yield_now().await;
            }
            (mode, replies)
        }));
    }
    let engine = common::genre_shift_engine();
    for task in tasks {
        let (mode, replies) = task.await.unwrap();
        let want = run_script(&engine, mode.parse().unwrap(), &common::GENRE_SHIFT_SCRIPT).unwrap();
        let want: Vec<Value> = want.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
        assert_eq!(replies, want);
    }
}

#[tokio::test]
async fn http_matches_cli_chat() {
    let app = app(DEFAULT_TTL);
    let engine = common::genre_shift_engine();
    for mode in [Mode::Baseline, Mode::Hierarchical] {
        let id = open(&app, mode.as_str()).await;
        let mut http = String::new();
        for line in common::GENRE_SHIFT_SCRIPT {
            let (_, reply) = say(&app, &id, line).await;
            let parsed: SystemResponse = serde_json::from_value(reply).unwrap();
            assert_eq!(parsed.diagnostics.mode, mode);
            http.push_str(&serde_json::to_string(&parsed).unwrap());
            http.push('\n');
        }
        let mut cli = Vec::new();
        let script = common::GENRE_SHIFT_SCRIPT.join("\n");
        hiercrs::service::cli::chat(&engine, mode, script.as_bytes(), &mut cli, true, false).unwrap();
        assert_eq!(String::from_utf8(cli).unwrap(), http);
    }
}
