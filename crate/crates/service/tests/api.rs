use std::fs;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use macsel_service::{router, AppState, RegistrySource};
use serde_json::{json, Value};
use tower::ServiceExt;

const SCENARIO_1: &str = r#"{"context":{"n_nodes":90,"network_radius":100,"pkt_rate":100}}"#;
const SCENARIO_2: &str = r#"{"context":{"n_nodes":110,"network_radius":70,"pkt_rate":100}}"#;
const BOTH: [&str; 2] = ["overhearing-avoidance", "distributed"];

async fn call(state: AppState, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn post(uri: &str, body: &str) -> (StatusCode, Value) {
    call(AppState::new(RegistrySource::Seed), "POST", uri, body).await
}

fn with(base: &str, key: &str, value: Value) -> String {
    let mut v: Value = serde_json::from_str(base).unwrap();
    v[key] = value;
    v.to_string()
}

fn golden(name: &str) -> Value {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[tokio::test]
async fn registry_snapshot_names_the_example_protocols() {
    let (status, v) = call(AppState::new(RegistrySource::Seed), "GET", "/api/registry", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    let names: Vec<&str> = v["data"]["protocols"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    for p in ["STEM", "SMACS", "AS-MAC"] {
        assert!(names.contains(&p), "{names:?}");
    }
}

#[tokio::test]
async fn empty_registry_file_gives_empty_lists() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.json");
    fs::write(&path, "").unwrap();
    let (status, v) = call(AppState::new(RegistrySource::File(path)), "GET", "/api/registry", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["protocols"], json!([]));
    assert_eq!(v["data"]["categories"], json!([]));
}

#[tokio::test]
async fn missing_registry_file_is_a_server_error() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(RegistrySource::File(dir.path().join("absent.json")));
    let (status, v) = call(state, "GET", "/api/registry", "").await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(v["status"], "error");
    assert!(v["error"]["message"].as_str().unwrap().contains("absent.json"));
}

#[tokio::test]
async fn registry_is_reloaded_when_the_file_changes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.json");
    fs::write(&path, "").unwrap();
    let state = AppState::new(RegistrySource::File(path.clone()));
    let (_, v) = call(state.clone(), "GET", "/api/registry", "").await;
    assert_eq!(v["data"]["protocols"], json!([]));

    fs::write(&path, macsel_core::registry::Registry::seed().to_json()).unwrap();
    let later = fs::metadata(&path).unwrap().modified().unwrap() + std::time::Duration::from_secs(5);
    fs::File::options().write(true).open(&path).unwrap().set_modified(later).unwrap();
    let (_, v) = call(state, "GET", "/api/registry", "").await;
    assert_eq!(v["data"]["protocols"].as_array().unwrap().len(), 6);
}

#[tokio::test]
async fn evaluate_matches_cli_json() {
    let (status, v) = post("/api/evaluate", SCENARIO_1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"], golden("scenario1_evaluate.json"));
    assert_eq!(v["data"]["evaluations"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn scenario_one_puts_scheduled_above_preamble_sampling() {
    let (_, v) = post("/api/evaluate", SCENARIO_1).await;
    let order: Vec<&str> = v["data"]["ranking"]["order"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let pos = |c: &str| order.iter().position(|x| *x == c).unwrap();
    assert!(pos("ScP") < pos("PSP"), "{order:?}");
}

#[tokio::test]
async fn degenerate_weights_are_rejected() {
    let (status, v) = post("/api/evaluate", &with(SCENARIO_1, "weights", json!({"alpha": 0, "beta": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["violations"][0]["field"], "weights");
}

#[tokio::test]
async fn invalid_fields_are_listed() {
    let (status, v) = post("/api/evaluate", r#"{"context":{"tx_range":-1,"n_nodes":0}}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let fields: Vec<&str> = v["error"]["violations"].as_array().unwrap().iter().map(|x| x["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"tx_range") && fields.contains(&"n_nodes"), "{fields:?}");

    let (status, v) = post("/api/evaluate", r#"{"context":{"tx_rnage":30}}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["violations"][0]["field"], "context.tx_rnage");
}

#[tokio::test]
async fn malformed_json_is_a_bad_request() {
    let (status, v) = post("/api/evaluate", r#"{"context": {"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["status"], "error");
}

#[tokio::test]
async fn select_matches_cli_json() {
    let (status, v) = post("/api/select", &with(SCENARIO_1, "requirements", json!(BOTH))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"], golden("scenario1_select.json"));
    assert_eq!(v["data"]["protocols"], json!(["SMACS", "AS-MAC"]));
}

#[tokio::test]
async fn scenario_two_selects_stem() {
    let (status, v) = post("/api/select", &with(SCENARIO_2, "requirements", json!(BOTH))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["best_category"], "PSP");
    assert_eq!(v["data"]["protocols"], json!(["STEM"]));
}

#[tokio::test]
async fn no_requirements_ranks_every_category() {
    let (status, v) = post("/api/select", SCENARIO_1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["feasible_categories"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn unknown_requirement_is_rejected() {
    let (status, v) = post("/api/select", &with(SCENARIO_1, "requirements", json!(["teleportation"]))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"]["message"].as_str().unwrap().contains("teleportation"));
}

#[tokio::test]
async fn unsatisfiable_requirements_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.json");
    let (reg, _) = macsel_core::registry::Registry::seed()
        .add_requirement(macsel_core::registry::Requirement {
            id: "multi-channel".into(),
            description: String::new(),
        })
        .unwrap();
    reg.save(&path).unwrap();
    let state = AppState::new(RegistrySource::File(path));
    let (status, v) = call(state, "POST", "/api/select", r#"{"requirements":["multi-channel"]}"#).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(v["error"]["message"].as_str().unwrap().contains("no satisfying category"));
}

fn sweep_body(from: f64, to: f64, steps: usize) -> String {
    json!({"axis": "pkt_rate", "from": from, "to": to, "steps": steps}).to_string()
}

#[tokio::test]
async fn sweep_returns_one_row_per_axis_value() {
    let (status, v) = post("/api/sweep", &sweep_body(1.0, 10.0, 2)).await;
    assert_eq!(status, StatusCode::OK);
    let rows = v["data"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["evaluations"].as_array().unwrap().len() == 3));
}

#[tokio::test]
async fn low_rate_sweep_favors_preamble_sampling() {
    let (_, v) = post("/api/sweep", &sweep_body(0.1, 1.0, 4)).await;
    for row in v["data"].as_array().unwrap() {
        let best = row["evaluations"]
            .as_array()
            .unwrap()
            .iter()
            .max_by(|a, b| a["cpf"].as_f64().unwrap().total_cmp(&b["cpf"].as_f64().unwrap()))
            .unwrap();
        assert_eq!(best["category"], "PSP", "{row}");
    }
}

#[tokio::test]
async fn bad_sweep_ranges_are_rejected() {
    assert_eq!(post("/api/sweep", &sweep_body(1.0, 10.0, 1)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post("/api/sweep", &sweep_body(10.0, 1.0, 5)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post("/api/sweep", r#"{"axis":"altitude","from":1,"to":2,"steps":2}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn oversized_sweep_is_refused() {
    let (status, v) = post("/api/sweep", &sweep_body(1.0, 10.0, 5000)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert!(v["error"]["message"].as_str().unwrap().contains("10000"));
    assert_eq!(post("/api/sweep", &sweep_body(1.0, 10.0, 3333)).await.0, StatusCode::OK);
}

#[tokio::test]
async fn cross_origin_requests_are_allowed() {
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/evaluate")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(AppState::new(RegistrySource::Seed)).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
