use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use convsearch::classify::ClassifierRules;
use convsearch::index::{build_index, Document};
use convsearch::rerank::CueLexicon;
use convsearch::service::{Engine, SessionDefaults, SessionStore};
use convsearch::textproc::TextConfig;
use convsearch_cli::http::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let docs = [
        ("p1", "A physician's assistant is a licensed medical professional who works with doctors."),
        ("p2", "Physician's assistant programs cost about $90,000 in tuition over 27 months."),
        ("p3", "Law school tuition can cost $150,000."),
        ("p4", "A nurse practitioner is a registered nurse with graduate training."),
    ]
    .map(|(id, text)| Ok(Document::new(id, text)));
    let index = build_index(docs, TextConfig::default()).unwrap();
    let engine = Engine::new(index, ClassifierRules::builtin(), CueLexicon::builtin());
    router(Arc::new(SessionStore::new(Arc::new(engine), SessionDefaults::default()).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz() {
    let (status, body) = call(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn two_turn_conversation() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/ask");

    let (status, first) = call(&app, Method::POST, &uri, Some(r#"{"utterance": "What is a physician's assistant?"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["resolved_query"], "What is a physician's assistant?");
    assert_eq!(first["category"], "Describe");

    let (status, second) = call(&app, Method::POST, &uri, Some(r#"{"utterance": "What does it cost?", "k": 2}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(second["resolved_query"], "What does physician's assistant cost?");
    assert_eq!(second["category"], "HowMuch");
    let results = second["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["doc_id"], "p2");
    let scores: Vec<f64> = results.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(results.iter().all(|r| r["snippet"].as_str().unwrap().chars().count() <= 300));
    let terms = second["weighted_terms"].as_array().unwrap();
    assert!(terms.contains(&json!(["cost", 5.0])));

    let (status, history) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(history["session_id"], id.as_str());
    assert_eq!(history["topic_phrase"], "physician's assistant");
    let turns = history["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2);
    assert_eq!(turns[1]["utterance"], "What does it cost?");
    assert_eq!(turns[1]["results"], second["results"]);
}

#[tokio::test]
async fn lambda_override() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/ask");
    let (status, body) = call(&app, Method::POST, &uri, Some(r#"{"utterance": "tuition cost", "lambda": 0}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!body["results"].as_array().unwrap().is_empty());
    let (status, body) = call(&app, Method::POST, &uri, Some(r#"{"utterance": "tuition cost", "lambda": -2}"#)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn validation_errors_are_400() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/ask");
    for body in [
        r#"{"utterance": "   "}"#,
        r#"{"utterance": "cost", "k": 0}"#,
        r#"{"utterance": 7}"#,
        r#"{"k": 3}"#,
        r#"not json"#,
        r#"{"utterance": "cost", "extra": true}"#,
        r#"{"utterance": "what is it"}"#,
    ] {
        let (status, value) = call(&app, Method::POST, &uri, Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(value["error"].as_str().is_some_and(|m| !m.is_empty()), "{body}: {value}");
    }
    let (_, history) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert!(history["turns"].as_array().unwrap().is_empty(), "failed asks must not append turns");
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = app();
    let (status, body) =
        call(&app, Method::POST, "/sessions/nope/ask", Some(r#"{"utterance": "What does it cost?"}"#)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
    assert_eq!(call(&app, Method::GET, "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn delete_then_ask_is_404() {
    let app = app();
    let id = new_session(&app).await;
    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) =
        call(&app, Method::POST, &format!("/sessions/{id}/ask"), Some(r#"{"utterance": "What does it cost?"}"#)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let app = app();
    let mut handles = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let id = new_session(&app).await;
            let uri = format!("/sessions/{id}/ask");
            let first = if i % 2 == 0 { "What is a physician's assistant?" } else { "What is a nurse practitioner?" };
            call(&app, Method::POST, &uri, Some(&json!({"utterance": first}).to_string())).await;
            let (_, second) = call(&app, Method::POST, &uri, Some(r#"{"utterance": "What does it cost?"}"#)).await;
            (i, second["resolved_query"].as_str().unwrap().to_string())
        }));
    }
    for h in handles {
        let (i, resolved) = h.await.unwrap();
        let expected =
            if i % 2 == 0 { "What does physician's assistant cost?" } else { "What does nurse practitioner cost?" };
        assert_eq!(resolved, expected);
    }
}
