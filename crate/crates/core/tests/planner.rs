use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use hrc_core::motion::{MotionFunction, MotionKind, GRIPPER_MODES};
use hrc_core::perception::ground_truth;
use hrc_core::planner::dsl::{self, DraftSubTask};
use hrc_core::planner::{
    Horizon, LanguageBackend, PlanRequest, Planner, PlannerError, PromptContext, RemoteBackend, RemoteConfig, WorldModel,
};
use hrc_core::scene::builtin;
use hrc_core::{Scene, SkillLibrary};
use proptest::prelude::*;

fn world(scene: &str) -> WorldModel {
    let scene = Scene::from_json(scene).unwrap();
    WorldModel::new(&scene, ground_truth(&scene))
}

fn motions(task: &str, w: &WorldModel) -> Vec<String> {
    let plan = Planner::default().plan_task(task, w, &SkillLibrary::in_memory()).unwrap();
    plan.motions().map(|m| m.to_string()).collect()
}

#[test]
fn put_apple_on_plate() {
    let got = motions("put the apple on the plate", &world(builtin::KITCHEN));
    let want = [
        "move_to_position(init)",
        "move_to_position(apple)",
        "gripper_control(close_low)",
        "move_to_position(init)",
        "move_to_position(plate)",
        "gripper_control(open)",
        "move_to_position(init)",
    ];
    assert_eq!(got, want);
}

#[test]
fn open_microwave() {
    let w = world(builtin::KITCHEN);
    let got = motions("open the microwave", &w);
    let want = [
        "move_to_position(microwave_handle)",
        "gripper_control(close)",
        "base_cycle_move(radius_door2axis)",
        "gripper_control(open)",
    ];
    assert_eq!(got, want);
    assert_eq!(Planner::default().classify_task("Open the microwave", &w).unwrap(), Horizon::Short);
}

#[test]
fn warm_up_decomposition() {
    let w = world(builtin::KITCHEN);
    let got = Planner::default().decompose("Warm up the apple", &w).unwrap();
    let want = ["open the microwave", "put the apple into the microwave", "close the microwave", "power on the microwave"];
    assert_eq!(got, want);
    assert_eq!(Planner::default().classify_task("Warm up the apple", &w).unwrap(), Horizon::Long);
}

#[test]
fn clean_table_decomposition() {
    let w = world(builtin::CLEAN_TABLE);
    let counts: std::collections::BTreeMap<String, usize> = w.inventory().into_iter().collect();
    assert_eq!((counts["cup"], counts["bottle"]), (1, 2));
    let got = Planner::default().decompose("Clean the table", &w).unwrap();
    let want = ["put the cup in the storage", "put the first bottle in the storage", "put the second bottle in the storage"];
    assert_eq!(got, want);
}

#[test]
fn roast_decomposition() {
    let got = Planner::default().decompose("Roast the apple", &world(builtin::KITCHEN)).unwrap();
    assert_eq!(got, ["open the oven", "put the apple into oven", "close the oven", "power on the oven"]);
}

#[test]
fn every_plan_binds_its_symbols() {
    let w = world(builtin::KITCHEN);
    for task in ["Warm up the apple", "Roast the apple", "Close the microwave", "Power on the oven", "Open the cabinet"] {
        let plan = Planner::default().plan_task(task, &w, &SkillLibrary::in_memory()).unwrap();
        assert!(plan.unbound_symbols().is_empty(), "{task}: {:?}", plan.unbound_symbols());
    }
}

#[test]
fn unknown_object_is_not_executable() {
    let err = Planner::default()
        .plan_task("put the banana on the plate", &world(builtin::KITCHEN), &SkillLibrary::in_memory())
        .unwrap_err();
    assert!(err.is_executability_failure(), "{err}");
}

#[test]
fn empty_task_is_rejected() {
    let err = Planner::default().plan_task("  ", &world(builtin::KITCHEN), &SkillLibrary::in_memory()).unwrap_err();
    assert_eq!(err, PlannerError::EmptyTask);
}

fn motion_strategy() -> impl Strategy<Value = MotionFunction> {
    let symbol = "[a-z][a-z0-9_]{0,12}";
    prop_oneof![
        symbol.prop_map(MotionFunction::move_to),
        prop::sample::select(GRIPPER_MODES.iter().map(|(m, _)| *m).collect::<Vec<_>>()).prop_map(MotionFunction::gripper),
        symbol.prop_map(MotionFunction::dmp),
        Just(MotionFunction::new(MotionKind::BaseCycleMove, "radius_door2axis")),
    ]
}

fn draft_strategy() -> impl Strategy<Value = Vec<DraftSubTask>> {
    let sub = ("[a-z]+( [a-z0-9]+){0,5}", prop::collection::vec(motion_strategy(), 1..8))
        .prop_map(|(description, motions)| DraftSubTask { description, motions });
    prop::collection::vec(sub, 1..6)
}

proptest! {
    #[test]
    fn plan_text_round_trips(drafts in draft_strategy()) {
        let text = dsl::emit(&drafts);
        prop_assert_eq!(dsl::parse(&text).unwrap(), drafts);
    }

    #[test]
    fn chained_puts_split_in_order(n in 1usize..4, sep in prop::sample::select(vec![", then ", " and then ", ". Then "])) {
        let w = world(builtin::CUPS);
        let steps: Vec<String> = (1..=n).map(|i| format!("pick the cup{i}")).collect();
        let got = Planner::default().decompose(&steps.join(sep), &w).unwrap();
        prop_assert_eq!(got, steps);
    }
}

/// A one-connection-at-a-time HTTP stub answering with `responses` in order.
fn stub_server(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut req = vec![0; length];
            reader.read_exact(&mut req).unwrap();
            bodies.push(String::from_utf8(req).unwrap());
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
        bodies
    });
    (url, handle)
}

fn completion(content: &str) -> String {
    serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string()
}

#[test]
fn remote_backend_retries_then_plans() {
    let text = "subtask: open the microwave\nmf: move_to_position(microwave_handle)\nmf: gripper_control(close)\nmf: base_cycle_move(radius_door2axis)\nmf: gripper_control(open)\n";
    let (url, server) = stub_server(vec![(503, "{}".into()), (200, completion(text))]);
    let backend = RemoteBackend::new(RemoteConfig { timeout_ms: 5_000, ..RemoteConfig::new(url, "stub-model") });
    let w = world(builtin::KITCHEN);
    let plan = Planner::new(Arc::new(backend)).plan_task("Open the microwave", &w, &SkillLibrary::in_memory()).unwrap();
    assert_eq!(plan.motions().count(), 4);
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), 2);
    let body: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["messages"][1]["role"], "user");
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("Open the microwave"));
}

#[test]
fn remote_garbage_is_not_executable() {
    let (url, server) = stub_server(vec![(200, completion("Sure! First, walk to the kitchen."))]);
    let backend = RemoteBackend::new(RemoteConfig { timeout_ms: 5_000, ..RemoteConfig::new(url, "m") });
    let err = Planner::new(Arc::new(backend))
        .plan_task("Open the microwave", &world(builtin::KITCHEN), &SkillLibrary::in_memory())
        .unwrap_err();
    assert!(matches!(err, PlannerError::Dsl { .. }), "{err}");
    server.join().unwrap();
}

#[test]
fn remote_client_errors_are_not_retried() {
    let (url, server) = stub_server(vec![(400, "{}".into())]);
    let backend = RemoteBackend::new(RemoteConfig { timeout_ms: 5_000, ..RemoteConfig::new(url, "m") });
    let w = world(builtin::KITCHEN);
    let ctx = PromptContext::standard();
    let err = backend.complete(&PlanRequest { task: "Open the microwave", context: &ctx, world: &w }).unwrap_err();
    assert_eq!(err.to_string(), "transport failed after 1 attempts: HTTP 400");
    server.join().unwrap();
}
