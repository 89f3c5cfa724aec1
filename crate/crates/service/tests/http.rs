use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use proptest::prelude::*;
use serde_json::{json, Value};
use tower::ServiceExt;

use railsafe_core::query::{evaluate, parse_query, EvalMode, Projection};
use railsafe_core::seed;
use railsafe_core::store::Archive;
use railsafe_service::{app, ApiConfig};

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    ontology: railsafe_core::ontology::Ontology,
}

fn fixture_with(token: Option<&str>, cors: &[&str]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::open(dir.path(), Arc::new(seed::ontology())).unwrap();
    archive.save(&mut seed::demo_collision(), false).unwrap();
    archive.save(&mut seed::demo_door_closing(), false).unwrap();
    let mut config = ApiConfig::new(dir.path(), dir.path().join("ontology.xml"));
    config.token = token.map(String::from);
    config.cors_origins = cors.iter().map(|s| s.to_string()).collect();
    let ontology = (**archive.ontology()).clone();
    Fixture { app: app(&config, archive), _dir: dir, ontology }
}

fn fixture() -> Fixture {
    fixture_with(None, &[])
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn ontology_tree_matches_core() {
    let f = fixture();
    let (status, body) = call(&f.app, Method::GET, "/ontology/tree", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serde_json::to_value(f.ontology.concept_tree()).unwrap());
}

#[tokio::test]
async fn concept_instances_direct_and_transitive() {
    let f = fixture();
    let o = &f.ontology;
    let (s, direct) = call(&f.app, Method::GET, "/ontology/concepts/risk/instances", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(direct, serde_json::to_value(o.instances_of("risk", false).unwrap()).unwrap());
    let (_, all) = call(&f.app, Method::GET, "/ontology/concepts/risk/instances?transitive=true", None).await;
    assert_eq!(all, serde_json::to_value(o.instances_of("risk", true).unwrap()).unwrap());
    assert!(all.as_array().unwrap().len() >= direct.as_array().unwrap().len());
    let (s, err) = call(&f.app, Method::GET, "/ontology/concepts/nope/instances", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown-concept");
}

#[tokio::test]
async fn create_get_and_conflict() {
    let f = fixture();
    let doc = serde_json::to_value(seed::exemplar_document()).unwrap();
    let req = Request::post("/scenarios")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(serde_json::to_vec(&doc).unwrap()))
        .unwrap();
    let resp = f.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    assert_eq!(resp.headers()[header::LOCATION], "/scenarios/table1-exemplar");

    let (s, got) = call(&f.app, Method::GET, "/scenarios/table1-exemplar", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(got["sheet"], doc["sheet"]);

    let (s, err) = call(&f.app, Method::POST, "/scenarios", Some(doc)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["code"], "id-conflict");

    let (s, list) = call(&f.app, Method::GET, "/scenarios", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 3);
    let (_, drafts) = call(&f.app, Method::GET, "/scenarios?status=draft", None).await;
    assert_eq!(drafts.as_array().unwrap().len(), 2);
    let (_, hits) = call(&f.app, Method::GET, "/scenarios?q=has%20critical", None).await;
    assert_eq!(hits.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn put_checks_id_and_invariants() {
    let f = fixture();
    let mut doc = serde_json::to_value(seed::demo_collision()).unwrap();
    let (s, err) = call(&f.app, Method::PUT, "/scenarios/other", Some(doc.clone())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "id-mismatch");

    doc["sheet"]["title"] = json!("Renamed");
    let (s, saved) = call(&f.app, Method::PUT, "/scenarios/demo-collision", Some(doc.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(saved["sheet"]["title"], "Renamed");

    // A table whose first step is swapped for a transition that is not enabled.
    let rows = doc["tables"][0]["rows"].as_array_mut().unwrap();
    rows.reverse();
    let (s, err) = call(&f.app, Method::PUT, "/scenarios/demo-collision", Some(doc)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "invariant-violation");
    assert!(!err["details"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn bad_bodies_and_unknown_routes() {
    let f = fixture();
    let req = Request::post("/scenarios").body(Body::from("{not json")).unwrap();
    let resp = f.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let (s, err) = call(&f.app, Method::GET, "/scenarios/missing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not-found");
    let (s, err) = call(&f.app, Method::GET, "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not-found");
}

#[tokio::test]
async fn validate_endpoint() {
    let f = fixture();
    let (s, body) = call(&f.app, Method::POST, "/scenarios/demo-collision/validate", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["error_count"], 0);
    assert!(body["summary"].as_str().unwrap().starts_with("0 errors"));
}

#[tokio::test]
async fn simulate_endpoint() {
    let f = fixture();
    let (s, report) = call(&f.app, Method::POST, "/scenarios/demo-collision/simulate", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(!report["tables"].as_array().unwrap().is_empty());

    let (s, report) = call(
        &f.app,
        Method::POST,
        "/scenarios/demo-collision/simulate",
        Some(json!({"predicate": "seg1 >= 5", "bounds": {"max_markings": 50}})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert!(report["tables"].as_array().unwrap().is_empty());

    let (s, err) = call(
        &f.app,
        Method::POST,
        "/scenarios/demo-collision/simulate",
        Some(json!({"predicate": "seg1 >="})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad-predicate");

    let (s, err) = call(
        &f.app,
        Method::POST,
        "/scenarios/demo-collision/simulate",
        Some(json!({"bounds": {"max_markings": 0}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "invalid-bound");

    let ex = serde_json::to_value(seed::exemplar_document()).unwrap();
    call(&f.app, Method::POST, "/scenarios", Some(ex)).await;
    let (s, err) = call(&f.app, Method::POST, "/scenarios/table1-exemplar/simulate", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["code"], "no-net");
}

#[tokio::test]
async fn simulate_store_replaces_tables() {
    let f = fixture();
    let (_, before) = call(&f.app, Method::GET, "/scenarios/demo-collision", None).await;
    let (s, report) = call(
        &f.app,
        Method::POST,
        "/scenarios/demo-collision/simulate",
        Some(json!({"all_paths": false, "store": true})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, after) = call(&f.app, Method::GET, "/scenarios/demo-collision", None).await;
    assert_eq!(after["tables"], report["tables"]);
    assert_eq!(after["sheet"], before["sheet"]);
}

#[tokio::test]
async fn query_endpoint() {
    let f = fixture();
    let (s, body) = call(
        &f.app,
        Method::POST,
        "/query",
        Some(json!({"text": "risks isa \"collision\"", "projection": "ids"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["ids"], json!(["demo-collision"]));

    let (s, err) = call(&f.app, Method::POST, "/query", Some(json!({"text": "risks isa"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "syntax-error");
    let (s, err) = call(&f.app, Method::POST, "/query", Some(json!({"text": "colour has \"red\""}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "unknown-parameter");
    let (s, err) = call(&f.app, Method::POST, "/query", Some(json!({"text": "risks isa \"zzz\""}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "unknown-concept");
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let f = fixture_with(Some("s3cret"), &[]);
    let (s, err) = call(&f.app, Method::GET, "/scenarios", None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(err["code"], "unauthorized");
    let req = Request::get("/scenarios").header(header::AUTHORIZATION, "Bearer wrong").body(Body::empty()).unwrap();
    assert_eq!(f.app.clone().oneshot(req).await.unwrap().status(), StatusCode::UNAUTHORIZED);
    let req = Request::get("/scenarios").header(header::AUTHORIZATION, "Bearer s3cret").body(Body::empty()).unwrap();
    assert_eq!(f.app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn cors_preflight() {
    let f = fixture_with(Some("t"), &["http://localhost:5173"]);
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/query")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = f.app.clone().oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}

const ATOMS: &[&str] = &[
    "risks isa \"collision\"",
    "risks isa \"risk\"",
    "risks has \"passenger-dragging\"",
    "has critical",
    "status is draft",
    "actors.trains >= 2",
    "actors.trains = 1",
    "summarized-failures isa \"summarized failure\"",
    "geographical-areas has \"terminus\"",
];

fn query_text() -> impl Strategy<Value = String> {
    let leaf = proptest::sample::select(ATOMS).prop_map(String::from);
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("not ({a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) and ({b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a}) or ({b})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // The HTTP layer adds nothing: results equal calling the core directly.
    #[test]
    fn query_over_http_equals_core(text in query_text()) {
        let dir = tempfile::tempdir().unwrap();
        let mut archive = Archive::open(dir.path(), Arc::new(seed::ontology())).unwrap();
        archive.save(&mut seed::demo_collision(), false).unwrap();
        archive.save(&mut seed::demo_door_closing(), false).unwrap();
        archive.save(&mut seed::exemplar_document(), false).unwrap();
        let q = parse_query(&text).unwrap();
        let direct = evaluate(&q, &archive, Projection::Ids, EvalMode::Index).unwrap();
        let app = app(&ApiConfig::new(dir.path(), dir.path().join("o.xml")), archive);
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let (s, body) = rt.block_on(call(&app, Method::POST, "/query", Some(json!({"text": text, "projection": "ids"}))));
        prop_assert_eq!(s, StatusCode::OK);
        prop_assert_eq!(body["ids"].clone(), json!(direct.ids));
    }
}
