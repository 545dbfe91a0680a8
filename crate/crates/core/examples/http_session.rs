//! Drives the HTTP session API in-process.

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use hiercrs::ingest::{build_engine, EngineConfig};
use hiercrs::service::http::{router, AppState, DEFAULT_TTL};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .expect("request");
    let response = app.clone().oneshot(request).await.expect("infallible");
    let status = response.status();
    let bytes = response.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> hiercrs::Result<()> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/genre_shift/config.toml"))?;
    let app = router(AppState::new(Arc::new(build_engine(&config)?), DEFAULT_TTL));

    let (status, created) = call(&app, "POST", "/session", r#"{"mode":"hierarchical"}"#).await;
    println!("POST /session -> {status} {created}");
    let id = created["id"].as_str().expect("session id").to_owned();

    for text in ["i love to watch funny movies", "i like some scary movie"] {
        let body = serde_json::json!({ "text": text }).to_string();
        let (status, reply) = call(&app, "POST", &format!("/session/{id}/utterance"), &body).await;
        println!("{status} {} | {}", reply["system_text"], reply["diagnostics"]["linearized"]);
    }
    let (status, state) = call(&app, "GET", &format!("/session/{id}/state"), "").await;
    println!("GET state -> {status}, {} turns", state["turns"].as_array().map_or(0, Vec::len));
    let (status, _) = call(&app, "DELETE", &format!("/session/{id}"), "").await;
    println!("DELETE -> {status}");
    Ok(())
}
