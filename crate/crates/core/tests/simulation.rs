use hrc_core::library::SkillLibrary;
use hrc_core::planner::{Planner, WorldModel};
use hrc_core::scene::{builtin, Scene};
use hrc_core::sim::{reason, run_plan, SimConfig};

fn run(scene: &str, task: &str) -> hrc_core::sim::ExecutionOutcome {
    let scene = Scene::from_json(scene).unwrap();
    let world = WorldModel::ground_truth(&scene);
    let lib = SkillLibrary::in_memory();
    let plan = Planner::default().plan_task(task, &world, &lib).unwrap();
    run_plan(&plan, &scene, &lib, &SimConfig::default()).0
}

#[test]
fn zero_shot_tasks_succeed_without_noise() {
    for (scene, task) in [
        (builtin::KITCHEN, "Put the apple on the plate"),
        (builtin::KITCHEN, "Open the microwave"),
        (builtin::KITCHEN, "Warm up the apple"),
        (builtin::CLEAN_TABLE, "Clean the table"),
        (builtin::CUPS, "Stack the cup1 on the cup3"),
        (builtin::CUPS, "Pick the middle cup"),
        (builtin::KITCHEN, "Power on the oven"),
        (builtin::CLUTTERED, "Put the cup on the plate"),
    ] {
        let out = run(scene, task);
        assert!(out.task_success, "{task}: {:?}", out.failure_reason);
    }
}

#[test]
fn oven_and_cabinet_fail_zero_shot() {
    let out = run(builtin::KITCHEN, "Open the oven");
    assert!(!out.task_success);
    assert_eq!(out.per_motion_results.last().unwrap().reason.as_deref(), Some(reason::WRONG_ARTICULATION));
    let out = run(builtin::KITCHEN, "Open the cabinet");
    assert!(!out.task_success);
    assert_eq!(out.per_motion_results.last().unwrap().reason.as_deref(), Some(reason::LATCHED));
}
