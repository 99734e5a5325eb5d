use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use healthdial_core::engine::Engine;
use healthdial_core::markup::parse;
use healthdial_core::orchestration::{LlmProvider, ScriptedProvider, ScriptedReply, Role};
use healthdial_core::store::ProjectStore;
use healthdial_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pipeline")
}

fn material() -> String {
    std::fs::read_to_string(fixtures().join("material.txt")).unwrap()
}

struct App {
    router: Router,
    _dir: tempfile::TempDir,
}

impl App {
    fn with_provider(provider: Arc<dyn LlmProvider>, token: Option<&str>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        let engine = Arc::new(Engine::new(store, provider));
        Self {
            router: router(AppState::new(engine, token.map(str::to_string))),
            _dir: dir,
        }
    }

    fn new() -> Self {
        Self::with_provider(
            Arc::new(ScriptedProvider::from_dir(&fixtures()).unwrap()),
            None,
        )
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, headers, body)
    }

    async fn json(&self, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(path);
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let (status, _, bytes) = self.send(req.body(body).unwrap()).await;
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn text(&self, method: Method, path: &str, body: &str) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(path)
            .header(header::CONTENT_TYPE, "text/plain")
            .body(Body::from(body.to_string()))
            .unwrap();
        let (status, _, bytes) = self.send(req).await;
        (status, String::from_utf8(bytes).unwrap())
    }

    async fn create(&self) -> String {
        let (status, body) = self
            .json(
                Method::POST,
                "/projects",
                Some(json!({"title": "Colon cancer screening", "material_text": material()})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["project_id"].as_str().unwrap().to_string()
    }

    /// create, plan, approve, generate every session.
    async fn pipeline(&self) -> String {
        let id = self.create().await;
        let (s, b) = self.json(Method::POST, &format!("/projects/{id}/plan"), None).await;
        assert_eq!(s, StatusCode::OK, "{b}");
        let (s, _) = self.json(Method::PUT, &format!("/projects/{id}/plan/approve"), None).await;
        assert_eq!(s, StatusCode::OK);
        let (s, b) = self.json(Method::POST, &format!("/projects/{id}/generate"), None).await;
        assert_eq!(s, StatusCode::OK, "{b}");
        id
    }
}

fn golden() -> String {
    std::fs::read_to_string(fixtures().join("golden.hdfsm")).unwrap()
}

#[tokio::test]
async fn health_is_open_and_everything_else_needs_the_token() {
    let app = App::with_provider(Arc::new(ScriptedProvider::new(Vec::<String>::new())), Some("s3cret"));
    let (s, _) = app.json(Method::GET, "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = app.json(Method::GET, "/projects", None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(b["code"], "unauthorized");
    let req = Request::get("/projects")
        .header(header::AUTHORIZATION, "Bearer s3cret")
        .body(Body::empty())
        .unwrap();
    let (s, _, _) = app.send(req).await;
    assert_eq!(s, StatusCode::OK);
    let req = Request::get("/projects")
        .header(header::AUTHORIZATION, "Bearer wrong")
        .body(Body::empty())
        .unwrap();
    assert_eq!(app.send(req).await.0, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn create_project_variants() {
    let app = App::new();
    let id = app.create().await;
    let (s, b) = app.json(Method::GET, &format!("/projects/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["material"]["body"], material());
    assert_eq!(b["plan"]["sessions"], json!([]));
    assert_eq!(b["plan_approved"], false);

    let (s, b) = app
        .text(Method::POST, "/projects?title=Pasted", "Some health text.")
        .await;
    assert_eq!(s, StatusCode::CREATED, "{b}");

    let data = base64::engine::general_purpose::STANDARD.encode("From a file.");
    let (s, b) = app
        .json(
            Method::POST,
            "/projects",
            Some(json!({"title": "Upload", "material_file": {"name": "notes.txt", "content_type": "text/plain", "data": data}})),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(b["material"]["source"], "imported-file");
    assert_eq!(b["material"]["imported_name"], "notes.txt");

    let (s, b) = app
        .json(
            Method::POST,
            "/projects",
            Some(json!({"title": "Pdf", "material_file": {"name": "a.pdf", "content_type": "application/pdf", "data": data}})),
        )
        .await;
    assert_eq!(s, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    assert_eq!(b["code"], "unsupported-media-type");

    let binary = base64::engine::general_purpose::STANDARD.encode([0xffu8, 0xfe, 0, 1]);
    let (s, _) = app
        .json(
            Method::POST,
            "/projects",
            Some(json!({"title": "Bin", "material_file": {"name": "x.txt", "data": binary}})),
        )
        .await;
    assert_eq!(s, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let (s, b) = app
        .json(Method::POST, "/projects", Some(json!({"title": "Empty", "material_text": "   "})))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(b["code"], "empty-material");
    let (s, _) = app.text(Method::POST, "/projects?title=x", "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let big = "a".repeat(healthdial_core::model::DEFAULT_MATERIAL_CAP + 1);
    let (s, b) = app
        .json(Method::POST, "/projects", Some(json!({"title": "Big", "material_text": big})))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(b["code"], "material-too-large");

    let (s, b) = app.json(Method::GET, "/projects", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["projects"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn errors_have_the_common_shape() {
    let app = App::new();
    let (s, b) = app.json(Method::GET, "/projects/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(b["code"], "project-not-found");
    assert!(b["message"].is_string());
    assert!(b["details"].is_array());

    let id = app.create().await;
    let req = Request::post(format!("/projects/{id}/edits"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let (s, _, bytes) = app.send(req).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let b: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(b["code"], "bad-request");

    let (s, b) = app.json(Method::GET, "/no/such/route", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(b["code"], "not-found");
}

#[tokio::test]
async fn generation_requires_an_approved_plan_and_cue_requires_a_plan() {
    let app = App::new();
    let id = app.create().await;
    let (s, b) = app
        .json(Method::POST, &format!("/projects/{id}/plan"), Some(json!({"cue": "shorter"})))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "cue-without-prior");

    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/plan"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["plan"]["sessions"].as_array().unwrap().len(), 3);
    assert_eq!(b["exchanges"][0]["outcome"], "parsed");

    let (s, b) = app
        .json(Method::POST, &format!("/projects/{id}/sessions/s1/generate"), None)
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "plan-not-approved");

    let (s, _) = app.json(Method::PUT, &format!("/projects/{id}/plan/approve"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = app
        .json(Method::POST, &format!("/projects/{id}/sessions/s1/generate"), None)
        .await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["fsm"]["session_id"], "s1");
    assert!(b["coverage"].as_array().unwrap().iter().all(|c| c["covered"] == true));

    let (s, b) = app.json(Method::GET, &format!("/projects/{id}/sessions/s1"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["topic"]["title"], "What is colorectal cancer");

    let (s, b) = app
        .json(Method::POST, &format!("/projects/{id}/sessions/s9/generate"), None)
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{b}");

    let (s, b) = app.json(Method::GET, &format!("/projects/{id}/exchanges"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["exchanges"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn provider_failures_map_to_502_and_422_with_exchanges() {
    let down = ScriptedProvider::from_replies((0..3).map(|_| ScriptedReply::Fail("down".into())));
    let app = App::with_provider(Arc::new(down), None);
    let id = app.create().await;
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/plan"), None).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(b["code"], "provider-unreachable");
    assert!(!b["exchanges"].as_array().unwrap().is_empty());

    let junk = ScriptedProvider::new(["no json here", "still none", "nope"]);
    let app = App::with_provider(Arc::new(junk), None);
    let id = app.create().await;
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/plan"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(b["code"], "invalid-structured-output");
    assert_eq!(b["exchanges"].as_array().unwrap().len(), 3);
    let (_, audited) = app.json(Method::GET, &format!("/projects/{id}/exchanges"), None).await;
    assert_eq!(audited["exchanges"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn pipeline_export_matches_golden_and_reimports_to_a_fixpoint() {
    let app = App::new();
    let id = app.pipeline().await;
    let req = Request::get(format!("/projects/{id}/export")).body(Body::empty()).unwrap();
    let (s, headers, bytes) = app.send(req).await;
    assert_eq!(s, StatusCode::OK);
    assert!(headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/plain"));
    let export = String::from_utf8(bytes).unwrap();
    assert_eq!(export, golden());
    assert!(parse(&export).is_ok());

    let fresh = App::new();
    let (s, b) = fresh
        .text(Method::POST, "/projects?title=Imported", "placeholder material")
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let other = serde_json::from_str::<Value>(&b).unwrap()["project_id"]
        .as_str()
        .unwrap()
        .to_string();
    let (s, b) = fresh.text(Method::POST, &format!("/projects/{other}/import"), &export).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    let (_, again) = fresh.text(Method::GET, &format!("/projects/{other}/export"), "").await;
    assert_eq!(again, export);

    let (s, b) = fresh
        .text(Method::POST, &format!("/projects/{other}/import"), "HEALTHDIAL-FSM v1\nDIALOGUE s1 \"x\"\n  STATE a\n")
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{b}");
    let b: Value = serde_json::from_str(&b).unwrap();
    assert_eq!(b["code"], "parse-error");
    assert!(!b["details"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn edits_undo_redo_and_history() {
    let app = App::new();
    let id = app.pipeline().await;
    let edit = json!({"kind": "edit-utterance", "session": "s1", "state": "who", "text": "Most cases are in adults over 45."});
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(edit)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["revision_count"], 1);
    let edited_hash = b["content_hash"].clone();

    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/undo"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["revision_count"], 0);
    assert_eq!(b["history"]["can_redo"], true);
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/redo"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["content_hash"], edited_hash);
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/redo"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "nothing-to-redo");

    let connect = json!({"kind": "connect-option", "session": "s1", "state": "what", "index": 1, "target": "who"});
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(connect)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["revision_count"], 1);

    let bad = json!({"kind": "delete-state", "session": "s1", "state": "hello"});
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(bad)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "would-orphan-entry");
    let missing = json!({"kind": "edit-utterance", "session": "s1", "state": "ghost", "text": "x"});
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(missing)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(b["code"], "unknown-target");

    let (s, b) = app.json(Method::GET, &format!("/projects/{id}/history"), None).await;
    assert_eq!(s, StatusCode::OK);
    let kinds: Vec<&str> = b["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["command"]["kind"].as_str().unwrap())
        .collect();
    assert_eq!(
        kinds,
        ["replace-plan", "replace-fsm", "replace-fsm", "replace-fsm", "edit-utterance", "connect-option"]
    );

    let (s, b) = app.json(Method::GET, &format!("/projects/{id}/stats"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["revision_count"], 1);
    assert_eq!(b["sessions"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn suggestions_can_be_accepted() {
    let app = App::new();
    let id = app.pipeline().await;
    let (s, b) = app
        .json(
            Method::POST,
            &format!("/projects/{id}/sessions/s3/states/colo/suggest"),
            Some(json!({"count": 3})),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{b}");
    let labels: Vec<&str> = b["options"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["Does it hurt?", "How long does it take?", "Got it"]);
    let accept = json!({"kind": "accept-suggestion", "session": "s3", "state": "colo", "label": labels[0], "target": "wrap", "create_stub": false});
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(accept)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["revision_count"], 1);

    let (s, _) = app
        .json(
            Method::POST,
            &format!("/projects/{id}/sessions/s3/states/ghost/suggest"),
            None,
        )
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = app
        .json(
            Method::POST,
            &format!("/projects/{id}/sessions/s3/states/colo/suggest"),
            Some(json!({"count": 0})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn playthrough_and_progress() {
    let app = App::new();
    let id = app.pipeline().await;
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/play/s2"), None).await;
    assert_eq!(s, StatusCode::CONFLICT, "{b}");
    assert_eq!(b["code"], "session-locked");

    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/play/s1"), None).await;
    assert_eq!(s, StatusCode::CREATED);
    let play = b["play_id"].as_str().unwrap().to_string();
    assert_eq!(b["options"], json!(["Okay, let's start", "What's that?"]));

    let (s, b) = app
        .json(Method::POST, &format!("/play/{play}/choose"), Some(json!({"index": 7})))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(b["code"], "out-of-range");
    for index in [0, 0, 0] {
        let (s, b) = app
            .json(Method::POST, &format!("/play/{play}/choose"), Some(json!({"index": index})))
            .await;
        assert_eq!(s, StatusCode::OK, "{b}");
    }
    let (s, b) = app.json(Method::GET, &format!("/play/{play}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["finished"], true);
    let (s, b) = app
        .json(Method::POST, &format!("/play/{play}/choose"), Some(json!({"index": 0})))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "already-finished");

    let (s, lines) = app.text(Method::GET, &format!("/play/{play}/transcript"), "").await;
    assert_eq!(s, StatusCode::OK);
    let lines: Vec<Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0]["speaker"], "agent");
    assert_eq!(lines[1]["speaker"], "patient");
    assert_eq!(lines[1]["text"], "Okay, let's start");

    let (s, b) = app.json(Method::GET, &format!("/projects/{id}/progress"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["sessions"]["s1"]["status"], "completed");
    let (s, _) = app.json(Method::POST, &format!("/projects/{id}/play/s2"), None).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = app.json(Method::GET, "/play/unknown", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idempotency_key_replays_instead_of_reapplying() {
    let app = App::new();
    let id = app.pipeline().await;
    let edit = json!({"kind": "add-option", "session": "s1", "state": "bye", "label": "Again", "target": "hello"});
    let send = |body: Value, key: &str| {
        Request::post(format!("/projects/{id}/edits"))
            .header(header::CONTENT_TYPE, "application/json")
            .header("idempotency-key", key)
            .body(Body::from(body.to_string()))
            .unwrap()
    };
    let (s1, _, first) = app.send(send(edit.clone(), "k1")).await;
    let (s2, h2, second) = app.send(send(edit.clone(), "k1")).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(first, second);
    assert_eq!(h2["idempotent-replayed"], "true");
    let (_, b) = app.json(Method::GET, &format!("/projects/{id}/history"), None).await;
    assert_eq!(b["entries"].as_array().unwrap().len(), 5);

    let other = json!({"kind": "rename-topic", "session": "s1", "title": "Basics"});
    let (s, _, _) = app.send(send(other.clone(), "k1")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    // A second request without a key is applied again.
    let (s, b) = app.json(Method::POST, &format!("/projects/{id}/edits"), Some(edit)).await;
    assert_eq!(s, StatusCode::CONFLICT, "{b}");
    assert_eq!(b["code"], "duplicate-label");

    // Concurrent retries with one key run once.
    let mut handles = Vec::new();
    for _ in 0..8 {
        let router = app.router.clone();
        let req = send(other.clone(), "k2");
        handles.push(tokio::spawn(async move {
            let resp = router.oneshot(req).await.unwrap();
            (resp.status(), resp.into_body().collect().await.unwrap().to_bytes())
        }));
    }
    let mut bodies = Vec::new();
    for h in handles {
        let (s, body) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    let (_, b) = app.json(Method::GET, &format!("/projects/{id}/history"), None).await;
    assert_eq!(b["entries"].as_array().unwrap().len(), 6);
}

#[tokio::test]
async fn plan_replay_with_same_fixtures_is_byte_identical() {
    let mut bodies = Vec::new();
    for _ in 0..3 {
        let app = App::new();
        let id = app.create().await;
        let req = Request::post(format!("/projects/{id}/plan")).body(Body::empty()).unwrap();
        let (s, _, bytes) = app.send(req).await;
        assert_eq!(s, StatusCode::OK);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        bodies.push(v["plan"].to_string());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn create_read_cycles_round_trip_every_field() {
    use rand::{Rng, SeedableRng};
    let app = App::with_provider(Arc::new(ScriptedProvider::new(Vec::<String>::new())), None);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let alphabet: Vec<char> = "abc XYZ\n\t\"\\é漢🙂-.,".chars().collect();
    let word = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> String {
        (0..rng.random_range(1..n)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    let cycles: usize = std::env::var("HEALTHDIAL_FUZZ_CYCLES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10_000);
    for _ in 0..cycles {
        let title = word(&mut rng, 20);
        let body = format!("x{}", word(&mut rng, 200));
        let (s, created) = if rng.random_bool(0.5) {
            app.json(Method::POST, "/projects", Some(json!({"title": title, "material_text": body})))
                .await
        } else {
            let name = format!("{}.txt", word(&mut rng, 8));
            let data = base64::engine::general_purpose::STANDARD.encode(&body);
            app.json(
                Method::POST,
                "/projects",
                Some(json!({"title": title, "material_file": {"name": name, "content_type": "text/plain", "data": data}})),
            )
            .await
        };
        assert_eq!(s, StatusCode::CREATED, "{created}");
        let id = created["project_id"].as_str().unwrap();
        let (s, read) = app.json(Method::GET, &format!("/projects/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(read, created);
        assert_eq!(read["material"]["body"], body);
        assert_eq!(read["material"]["title"], title);
    }
}

#[test]
fn roles_used_by_fixtures_exist() {
    for role in ["planner", "designer", "suggester"] {
        assert!(Role::ALL.iter().any(|r| r.as_str() == role));
        assert!(fixtures().join(role).is_dir());
    }
}
