use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use mdt_core::pipeline::{CopyRewriter, KeywordTagger, TagPredictor, UtteranceRewriter};
use mdt_core::service::{router, AppState, Store};

pub const BOUNDARY: &str = "XyZbOuNdArY";

pub fn transcript(texts: &[&str]) -> String {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{{\"speaker\":\"S{}\",\"text\":\"{t}\"}}\n", i % 2))
        .collect()
}

pub fn multipart(transcript: &str, metadata: Option<&str>) -> String {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"transcript\"; filename=\"t.jsonl\"\r\n\
         Content-Type: application/x-ndjson\r\n\r\n{transcript}\r\n"
    );
    if let Some(m) = metadata {
        body.push_str(&format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"metadata\"\r\n\
             Content-Type: application/json\r\n\r\n{m}\r\n"
        ));
    }
    body.push_str(&format!("--{BOUNDARY}--\r\n"));
    body
}

pub fn app_with(detector: Arc<dyn TagPredictor>, rewriter: Arc<dyn UtteranceRewriter>, token: Option<&str>) -> Router {
    let state = AppState::new(Store::in_memory().unwrap(), detector, rewriter, token.map(str::to_owned));
    router(state, None)
}

pub fn app() -> Router {
    app_with(
        Arc::new(KeywordTagger { keywords: vec!["decide".into()] }),
        Arc::new(CopyRewriter { prefix: "Decision: ".into() }),
        None,
    )
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, json)
}

pub fn upload_req(body: String, key: Option<&str>) -> Request<Body> {
    let mut b = Request::post("/meetings").header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"));
    if let Some(k) = key {
        b = b.header("idempotency-key", k);
    }
    b.body(Body::from(body)).unwrap()
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn post(uri: &str) -> Request<Body> {
    Request::post(uri).body(Body::empty()).unwrap()
}

pub async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..500 {
        let (status, job) = send(app, get(&format!("/meetings/{id}/job"))).await;
        assert_eq!(status, StatusCode::OK);
        if job["state"] == "done" || job["state"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job for {id} did not finish");
}
