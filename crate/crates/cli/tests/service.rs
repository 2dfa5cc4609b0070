mod common;

use std::time::Duration;

use adaptq_cli::service::{serve, AppState, DEFAULT_SESSION_TTL};
use common::fixture_model;
use reqwest::StatusCode;
use serde_json::{json, Value};

async fn start(ttl: Duration) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, AppState::new(fixture_model(), ttl)));
    format!("http://{addr}")
}

async fn post(client: &reqwest::Client, url: String, body: Value) -> (StatusCode, Value) {
    let r = client.post(url).json(&body).send().await.unwrap();
    (r.status(), r.json().await.unwrap())
}

#[tokio::test]
async fn full_session_follows_the_greedy_policy() {
    let base = start(DEFAULT_SESSION_TTL).await;
    let c = reqwest::Client::new();

    let health: Value = c
        .get(format!("{base}/healthz"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");
    let model: Value = c
        .get(format!("{base}/v1/model"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(model["forced_features"], json!(["sex", "age", "race"]));
    assert_eq!(model["max_questions"], 2);

    let (status, s) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 1, "age": 60, "race": 2}}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(s["status"], "awaiting_answer");
    assert_eq!(s["pending_question"], json!({"index": 3, "name": "la1ar2"}));
    assert_eq!(s["guess"], Value::Null);
    let id = s["session_id"].as_str().unwrap().to_string();

    let snapshot: Value = c
        .get(format!("{base}/v1/sessions/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(snapshot["trace"]["questions"], json!([]));

    let (_, s) = post(
        &c,
        format!("{base}/v1/sessions/{id}/answer"),
        json!({"value": 1}),
    )
    .await;
    assert_eq!(s["pending_question"]["name"], "hypev");
    let (status, s) = post(
        &c,
        format!("{base}/v1/sessions/{id}/answer"),
        json!({"value": 0}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["status"], "guessed");
    assert_eq!(s["pending_question"], Value::Null);
    let p = s["guess"]["p_positive"].as_f64().unwrap();
    assert_eq!(format!("{p:.3}"), "0.874");
    assert_eq!(s["guess"]["predicted_class"], 1);

    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions/{id}/answer"),
        json!({"value": 0}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let snapshot: Value = c
        .get(format!("{base}/v1/sessions/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let names: Vec<&str> = snapshot["trace"]["questions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["la1ar2", "hypev"]);

    for _ in 0..2 {
        let r = c
            .delete(format!("{base}/v1/sessions/{id}"))
            .send()
            .await
            .unwrap();
        assert!(r.status().is_success());
    }
    let r = c
        .get(format!("{base}/v1/sessions/{id}"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn old_respondent_gets_an_immediate_guess() {
    let base = start(DEFAULT_SESSION_TTL).await;
    let c = reqwest::Client::new();
    let (_, s) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 2, "age": 85, "race": 0}}),
    )
    .await;
    assert_eq!(s["status"], "guessed");
    assert_eq!(
        format!("{:.3}", s["guess"]["p_positive"].as_f64().unwrap()),
        "0.622"
    );
    // Ages beyond the training range are clamped to it.
    let (_, t) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 2, "age": 120, "race": 0}}),
    )
    .await;
    assert_eq!(t["guess"], s["guess"]);
}

#[tokio::test]
async fn malformed_requests_are_client_errors() {
    let base = start(DEFAULT_SESSION_TTL).await;
    let c = reqwest::Client::new();
    let (status, body) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 1, "race": 2}}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("age"));
    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 1, "age": 40, "race": 2, "hypev": 1}}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": "x", "age": 40, "race": 2}}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, s) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 1, "age": 40, "race": 1}}),
    )
    .await;
    let id = s["session_id"].as_str().unwrap();
    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions/{id}/answer"),
        json!({"value": "yes"}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let r = c
        .post(format!("{base}/v1/sessions/{id}/answer"))
        .header("content-type", "application/json")
        .body("not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions/nope/answer"),
        json!({"value": 1}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn expired_sessions_refuse_answers() {
    let base = start(Duration::from_millis(50)).await;
    let c = reqwest::Client::new();
    let (_, s) = post(
        &c,
        format!("{base}/v1/sessions"),
        json!({"answers": {"sex": 1, "age": 40, "race": 1}}),
    )
    .await;
    let id = s["session_id"].as_str().unwrap();
    tokio::time::sleep(Duration::from_millis(80)).await;
    let snapshot: Value = c
        .get(format!("{base}/v1/sessions/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(snapshot["status"], "expired");
    let (status, _) = post(
        &c,
        format!("{base}/v1/sessions/{id}/answer"),
        json!({"value": 1}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let base = start(DEFAULT_SESSION_TTL).await;
    let c = reqwest::Client::new();
    let mut handles = Vec::new();
    for k in 0..16 {
        let (c, base) = (c.clone(), base.clone());
        handles.push(tokio::spawn(async move {
            let (_, s) = post(
                &c,
                format!("{base}/v1/sessions"),
                json!({"answers": {"sex": 1, "age": 40, "race": 1}}),
            )
            .await;
            let id = s["session_id"].as_str().unwrap().to_string();
            let mut s = s;
            while s["status"] == "awaiting_answer" {
                s = post(
                    &c,
                    format!("{base}/v1/sessions/{id}/answer"),
                    json!({"value": k % 2}),
                )
                .await
                .1;
            }
            (k, s["guess"]["p_positive"].as_f64().unwrap())
        }));
    }
    for h in handles {
        let (k, p) = h.await.unwrap();
        let expected = if k % 2 == 1 { "0.924" } else { "0.376" };
        assert_eq!(format!("{p:.3}"), expected, "session {k}");
    }
}
