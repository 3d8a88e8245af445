use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use hrc_core::scene::builtin;
use hrc_core::session::demos::open_door;
use hrc_core::session::{ClientFrame, Command, DemoSample, Phase, ServerFrame, Session};
use hrc_core::{Scene, SkillLibrary};
use hrc_server::{router, serve, AppState, ServerConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::{self, Message};
use tower::ServiceExt;

const QUESTION: &str = "There are multiple objects share the same name, which one do you prefer?";

fn state(scene: &str) -> AppState {
    let session = Session::with_defaults(Scene::from_json(scene).unwrap(), SkillLibrary::in_memory());
    AppState::new(session, ServerConfig::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn run_to_rest(st: &AppState) {
    while st.with_session(|s| s.phase()) == Phase::Executing {
        st.step();
    }
}

fn oven_demo(st: &AppState) -> Vec<DemoSample> {
    st.with_session(|s| {
        let oven = s.scene().objects.iter().find(|o| o.name == "oven").unwrap();
        open_door(oven, s.scene().robot.ee_pos).unwrap()
    })
}

#[tokio::test]
async fn fresh_session_is_idle() {
    let app = router(state(builtin::KITCHEN));
    let (code, s) = call(&app, "GET", "/state", None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(s["phase"], "idle");
    assert_eq!(call(&app, "GET", "/plan", None).await.1, Value::Null);
    assert_eq!(call(&app, "GET", "/library", None).await.1, json!([]));
    let (_, scene) = call(&app, "GET", "/scene", None).await;
    assert!(scene["objects"].as_array().unwrap().iter().any(|o| o["name"] == "oven"));
}

#[tokio::test]
async fn submit_starts_a_plan_and_blocks_a_second_submit() {
    let app = router(state(builtin::KITCHEN));
    let (code, s) = call(&app, "POST", "/task", Some(json!({ "text": "Open the oven" }))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(s["phase"], "executing");
    let (_, plan) = call(&app, "GET", "/plan", None).await;
    assert_eq!(plan["subtasks"][0]["description"], "open the oven");

    let (code, err) = call(&app, "POST", "/task", Some(json!({ "text": "Open the microwave" }))).await;
    assert_eq!(code, StatusCode::CONFLICT);
    assert_eq!(err["phase"], "executing");
    assert_eq!(call(&app, "GET", "/plan", None).await.1, plan, "a rejected submit leaves the plan alone");
}

#[tokio::test]
async fn illegal_calls_report_the_phase() {
    let app = router(state(builtin::KITCHEN));
    for uri in ["/resume", "/pause", "/demo/start", "/demo/finish", "/skill/discard"] {
        let (code, err) = call(&app, "POST", uri, None).await;
        assert_eq!(code, StatusCode::CONFLICT, "{uri}");
        assert_eq!(err["phase"], "idle");
        assert!(err["error"].as_str().unwrap().contains("idle"), "{err}");
    }
    let (code, _) = call(&app, "POST", "/task", Some(json!({ "text": "   " }))).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    let (code, _) = call(&app, "POST", "/task", Some(json!({ "txt": "Open the oven" }))).await;
    assert!(code.is_client_error());
}

#[tokio::test]
async fn ambiguous_task_asks_and_resumes_on_the_answer() {
    let app = router(state(builtin::CUPS));
    let (_, s) = call(&app, "POST", "/task", Some(json!({ "text": "Pick the cup" }))).await;
    assert_eq!(s["phase"], "awaiting_clarification");
    assert_eq!(s["pending_question"], QUESTION);
    assert_eq!(s["candidates"], json!(["cup1", "cup2", "cup3"]));
    let (code, _) = call(&app, "POST", "/clarify", Some(json!({ "answer": "the seventh" }))).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, s) = call(&app, "POST", "/clarify", Some(json!({ "answer": "2" }))).await;
    assert_eq!(s["phase"], "executing");
    assert_eq!(s["task_text"], "pick the cup2");
}

#[tokio::test]
async fn teach_over_http_then_succeed() {
    let st = state(builtin::KITCHEN);
    let app = router(st.clone());
    call(&app, "POST", "/task", Some(json!({ "text": "Open the oven" }))).await;
    run_to_rest(&st);
    let (_, s) = call(&app, "GET", "/state", None).await;
    assert_eq!(s["last_status"]["success"], false);

    call(&app, "POST", "/reset", None).await;
    call(&app, "POST", "/task", Some(json!({ "text": "Open the oven" }))).await;
    assert_eq!(call(&app, "POST", "/pause", None).await.1["phase"], "paused");
    assert_eq!(call(&app, "POST", "/demo/start", None).await.1["phase"], "demonstrating");
    for x in oven_demo(&st) {
        st.apply(Command::Sample(x)).unwrap();
    }
    let (_, s) = call(&app, "POST", "/demo/finish", None).await;
    assert_eq!(s["phase"], "fitting");
    let id = s["recording"]["id"].as_str().unwrap().to_string();
    assert_eq!(s["recording"]["proposed_skill_name"], "open_oven_handle");

    let (code, _) = call(&app, "POST", "/skill/commit", Some(json!({ "recording_id": "rec-99" }))).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, s) = call(&app, "POST", "/skill/commit", Some(json!({ "recording_id": id }))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(s["recording"]["committed_as"], "open_oven_handle");
    let (code, _) = call(&app, "POST", "/skill/commit", Some(json!({ "recording_id": id }))).await;
    assert_eq!(code, StatusCode::CONFLICT, "a recording commits once");
    let (_, lib) = call(&app, "GET", "/library", None).await;
    assert_eq!(lib[0]["name"], "open_oven_handle");
    call(&app, "POST", "/resume", None).await;
    run_to_rest(&st);

    call(&app, "POST", "/reset", None).await;
    call(&app, "POST", "/task", Some(json!({ "text": "Open the oven" }))).await;
    let (_, plan) = call(&app, "GET", "/plan", None).await;
    let kinds: Vec<&str> =
        plan["subtasks"][0]["motions"].as_array().unwrap().iter().map(|m| m["kind"].as_str().unwrap()).collect();
    assert!(kinds.iter().all(|k| *k == "dmp_publish"), "{kinds:?}");
    run_to_rest(&st);
    let (_, s) = call(&app, "GET", "/state", None).await;
    assert_eq!(s["last_status"]["success"], true, "{}", s["last_status"]);
}

#[tokio::test]
async fn event_log_lines_carry_the_schema() {
    let st = state(builtin::KITCHEN);
    let app = router(st.clone());
    call(&app, "POST", "/task", Some(json!({ "text": "Open the microwave" }))).await;
    run_to_rest(&st);
    let req = Request::builder().uri("/events").body(Body::empty()).unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(res.headers()["content-type"], "application/jsonl");
    let text = String::from_utf8(res.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(text.lines().count(), 4);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        for key in ["t", "motion", "robot", "changed_objects"] {
            assert!(v.get(key).is_some(), "{key} missing from {line}");
        }
    }
}

#[test]
fn frames_use_the_wire_tags() {
    let s = Session::with_defaults(Scene::from_json(builtin::KITCHEN).unwrap(), SkillLibrary::in_memory());
    let state = serde_json::to_value(ServerFrame::State(Box::new(s.state()))).unwrap();
    assert_eq!(state["type"], "state");
    assert_eq!(state["phase"], "idle");
    let q = serde_json::to_value(ServerFrame::Question { question: QUESTION.into(), candidates: vec![] }).unwrap();
    assert_eq!(q["type"], "question");
    let c: ClientFrame = serde_json::from_str(r#"{"type":"demo_sample","t":0.5,"x":0.4,"y":0.1,"z":0.8,"aperture":1}"#).unwrap();
    assert_eq!(c, ClientFrame::DemoSample(DemoSample { t: 0.5, x: 0.4, y: 0.1, z: 0.8, aperture: 1.0 }));
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_frame(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn wait_for(ws: &mut Ws, mut pred: impl FnMut(&Value) -> bool) -> Value {
    loop {
        let f = next_frame(ws).await;
        if pred(&f) {
            return f;
        }
    }
}

async fn live(config: ServerConfig) -> (AppState, String) {
    let st =
        AppState::new(Session::with_defaults(Scene::from_json(builtin::KITCHEN).unwrap(), SkillLibrary::in_memory()), config);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("ws://{}/stream", listener.local_addr().unwrap());
    tokio::spawn(serve(listener, st.clone()));
    (st, url)
}

#[tokio::test]
async fn stream_mirrors_samples_and_times_out() {
    let config = ServerConfig {
        tick_interval: Duration::from_millis(10),
        stream_gap: Duration::from_millis(300),
        ..ServerConfig::default()
    };
    let (st, url) = live(config).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let first = next_frame(&mut ws).await;
    assert_eq!((first["type"].as_str(), first["phase"].as_str()), (Some("state"), Some("idle")));

    match tokio_tungstenite::connect_async(&url).await {
        Err(tungstenite::Error::Http(res)) => assert_eq!(res.status(), 409),
        other => panic!("second stream accepted: {:?}", other.map(|_| ())),
    }

    st.apply(Command::Submit { text: "Open the oven".into() }).unwrap();
    st.apply(Command::Pause).unwrap();
    wait_for(&mut ws, |f| f["type"] == "state" && f["phase"] == "paused").await;
    st.apply(Command::StartDemo).unwrap();
    let ee = st.with_session(|s| s.scene().robot.ee_pos);
    let sample = json!({ "type": "demo_sample", "t": 0.0, "x": ee.x, "y": ee.y, "z": ee.z - 0.05, "aperture": 1.0 });
    ws.send(Message::Text(sample.to_string().into())).await.unwrap();
    let delta = wait_for(&mut ws, |f| f["type"] == "scene_delta").await;
    assert_eq!(delta["motion"], "demo_sample");
    assert!((delta["robot"]["ee_pos"][2].as_f64().unwrap() - (ee.z - 0.05)).abs() < 1e-9, "{delta}");

    ws.send(Message::Text("{\"type\":\"wave\"}".into())).await.unwrap();
    let err = wait_for(&mut ws, |f| f["type"] == "log").await;
    assert_eq!(err["level"], "error");

    let warn = wait_for(&mut ws, |f| f["type"] == "log" && f["level"] == "warn").await;
    assert!(warn["message"].as_str().unwrap().contains("quiet"), "{warn}");
    let back = next_frame(&mut ws).await;
    assert_eq!((back["type"].as_str(), back["phase"].as_str()), (Some("state"), Some("paused")));
    assert!(back["recording"].is_null());
}

#[tokio::test]
async fn driver_runs_plans_to_completion() {
    let (st, url) = live(ServerConfig { tick_interval: Duration::from_millis(5), ..ServerConfig::default() }).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    next_frame(&mut ws).await;
    st.apply(Command::Submit { text: "Open the microwave".into() }).unwrap();
    let mut deltas = 0;
    let done = wait_for(&mut ws, |f| {
        deltas += usize::from(f["type"] == "scene_delta");
        f["type"] == "state" && f["phase"] == "idle"
    })
    .await;
    assert_eq!(done["last_status"]["success"], true);
    assert_eq!(deltas, 4, "one delta per motion");

    drop(ws);
    // The slot frees up once the first stream closes.
    for _ in 0..50 {
        if tokio_tungstenite::connect_async(&url).await.is_ok() {
            return;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("stream slot never released");
}
