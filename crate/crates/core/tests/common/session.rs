//! Session drivers shared by the session suite and the acceptance runner.

use std::collections::{BTreeSet, HashSet};

use hrc_core::library::SkillLibrary;
use hrc_core::scene::builtin;
use hrc_core::session::demos::open_door;
use hrc_core::session::{is_declared, Command, DemoSample, Phase, Session, TRANSITIONS};
use hrc_core::{MotionKind, Scene};

pub fn kitchen() -> Scene {
    Scene::from_json(builtin::KITCHEN).unwrap()
}

pub fn cups() -> Scene {
    Scene::from_json(builtin::CUPS).unwrap()
}

pub fn submit(s: &mut Session, text: &str) {
    s.handle(Command::Submit { text: text.into() }).unwrap();
}

pub fn oven_demo(s: &Session) -> Vec<DemoSample> {
    let oven = s.scene().objects.iter().find(|o| o.name == "oven").unwrap();
    open_door(oven, s.scene().robot.ee_pos).unwrap()
}

pub fn stream(s: &mut Session, samples: &[DemoSample]) {
    for x in samples {
        s.handle(Command::Sample(*x)).unwrap();
    }
}

pub fn oven_door(s: &Session) -> f64 {
    s.scene().objects.iter().find(|o| o.name == "oven").unwrap().state.door_angle
}

/// Fail, demonstrate, commit, then succeed with the stored skill. Returns the final
/// event log.
pub fn one_shot(s: &mut Session) -> String {
    submit(s, "Open the oven");
    assert_eq!(s.run(), Phase::Idle);
    assert!(!s.last_status().unwrap().success);

    s.handle(Command::Reset).unwrap();
    submit(s, "Open the oven");
    s.handle(Command::Pause).unwrap();
    s.handle(Command::StartDemo).unwrap();
    let demo = oven_demo(s);
    stream(s, &demo);
    assert!(oven_door(s) > 1.4, "the mirrored demonstration opens the oven");
    s.handle(Command::FinishDemo).unwrap();
    assert_eq!(s.phase(), Phase::Fitting);
    let rec = s.recording().unwrap().clone();
    assert_eq!(rec.proposed_skill_name.as_deref(), Some("open_oven_handle"));
    s.handle(Command::Commit { recording_id: rec.id.clone(), name: None, replace: false }).unwrap();
    s.handle(Command::Resume).unwrap();
    let plan = s.plan().unwrap();
    assert_eq!(plan.subtasks[0].skill_name.as_deref(), Some("open_oven_handle"));
    assert!(plan.subtasks[0].uses_dmp());
    assert_eq!(s.run(), Phase::Idle);
    assert!(s.last_status().unwrap().success);

    s.handle(Command::Reset).unwrap();
    submit(s, "Open the oven");
    let motions: Vec<String> = s.plan().unwrap().motions().map(|m| m.to_string()).collect();
    assert_eq!(motions, ["dmp_publish(open_oven_handle)", "dmp_publish(open_oven_handle_ex)"]);
    assert!(s.plan().unwrap().motions().all(|m| m.kind == MotionKind::DmpPublish));
    assert_eq!(s.run(), Phase::Idle);
    let st = s.last_status().unwrap();
    assert!(st.success, "{st:?}");
    s.simulator().event_log_jsonl()
}

pub fn paused_oven(scene: Scene) -> Session {
    let mut s = Session::with_defaults(scene, SkillLibrary::in_memory());
    submit(&mut s, "Open the oven");
    s.handle(Command::Pause).unwrap();
    s.handle(Command::StartDemo).unwrap();
    s
}

pub fn sample(t: f64, x: f64, y: f64, z: f64, aperture: f64) -> DemoSample {
    DemoSample { t, x, y, z, aperture }
}

pub fn alphabet(s: &Session) -> Vec<Command> {
    let last = s.recording().and_then(|r| r.samples.last().copied());
    let t = last.map_or(0.0, |l| l.t);
    let ee = s.scene().robot.ee_pos;
    let id = s.recording().map_or("rec-0".to_string(), |r| r.id.clone());
    vec![
        Command::Submit { text: "Open the oven".into() },
        Command::Submit { text: "Pick the cup".into() },
        Command::Submit { text: "Juggle the moon".into() },
        Command::Tick,
        Command::Pause,
        Command::Resume,
        Command::StartDemo,
        Command::Sample(sample(t + 0.1, ee.x + 0.02, ee.y - 0.02, ee.z - 0.01, if last.is_some() { 0.0 } else { 1.0 })),
        Command::Sample(sample(t + 2.5, ee.x, ee.y, ee.z, 1.0)),
        Command::FinishDemo,
        Command::StreamTimeout,
        Command::Commit { recording_id: id, name: None, replace: false },
        Command::Discard,
        Command::Clarify { answer: "2".into() },
        Command::Abort,
        Command::Reset,
    ]
}

pub fn fingerprint(s: &Session) -> String {
    format!(
        "{}|{}|{}",
        serde_json::to_string(&s.state()).unwrap(),
        serde_json::to_string(s.scene()).unwrap(),
        serde_json::to_string(&s.recording()).unwrap()
    )
}

pub fn check_atomic(s: &Session) {
    if let Some(ev) = s.simulator().events().last() {
        assert_eq!(&ev.robot, s.simulator().robot(), "robot moved after the last logged event");
    }
}

pub struct Explorer {
    pub seen: HashSet<(String, usize)>,
    pub taken: BTreeSet<(Phase, Phase)>,
    pub nodes: usize,
}

impl Explorer {
    pub fn visit(&mut self, s: &Session, depth: usize) {
        if depth == 0 || !self.seen.insert((fingerprint(s), depth)) {
            return;
        }
        for c in alphabet(s) {
            let mut next = s.clone();
            let before = next.transitions().len();
            let fp = fingerprint(&next);
            if next.handle(c.clone()).is_err() {
                assert_eq!(fingerprint(&next), fp, "rejected {c:?} changed the session");
                assert_eq!(next.transitions().len(), before);
                continue;
            }
            self.nodes += 1;
            for t in &next.transitions()[before..] {
                assert!(is_declared(t.from, t.to), "undeclared {:?} -> {:?} via {}", t.from, t.to, t.command);
                self.taken.insert((t.from, t.to));
            }
            check_atomic(&next);
            if next.phase() == Phase::Paused {
                let st = next.state();
                let plan = st.current_plan.as_ref().unwrap();
                assert!(st.cursor.subtask <= plan.subtasks.len());
            }
            self.visit(&next, depth - 1);
        }
    }
}

pub fn fitting_root() -> Session {
    let mut s = paused_oven(kitchen());
    let demo = oven_demo(&s);
    stream(&mut s, &demo);
    s.handle(Command::FinishDemo).unwrap();
    assert_eq!(s.phase(), Phase::Fitting);
    s
}

/// Every command sequence of length <= 6 from idle (two scenes), plus roots inside
/// the demonstration loop. Panics on an undeclared transition or a non-atomic pause.
pub fn explore_closure() -> Explorer {
    let mut ex = Explorer { seen: HashSet::new(), taken: BTreeSet::new(), nodes: 0 };
    for scene in [kitchen(), cups()] {
        ex.visit(&Session::with_defaults(scene, SkillLibrary::in_memory()), 6);
    }
    // Roots deeper in the loop than six commands from idle can reach.
    ex.visit(&fitting_root(), 6);
    let mut demonstrating = paused_oven(kitchen());
    let head = oven_demo(&demonstrating);
    stream(&mut demonstrating, &head[..4]);
    ex.visit(&demonstrating, 4);

    let declared: BTreeSet<(Phase, Phase)> = TRANSITIONS.iter().copied().collect();
    let missing: Vec<_> = declared.difference(&ex.taken).collect();
    assert!(missing.is_empty(), "declared but never taken: {missing:?}");
    ex
}

/// Pausing after three ticks leaves exactly three logged motions and a robot at rest.
pub fn pause_atomicity() {
    let mut s = Session::with_defaults(kitchen(), SkillLibrary::in_memory());
    submit(&mut s, "Put the apple on the plate");
    for _ in 0..3 {
        s.handle(Command::Tick).unwrap();
    }
    s.handle(Command::Pause).unwrap();
    let events = s.simulator().events();
    assert_eq!(events.len(), 3);
    assert_eq!(s.cursor().motion, 3);
    let plan: Vec<String> = s.plan().unwrap().motions().map(|m| m.to_string()).collect();
    let logged: Vec<&str> = events.iter().map(|e| e.motion.as_str()).collect();
    assert_eq!(logged, plan[..3]);
    check_atomic(&s);
    s.handle(Command::Resume).unwrap();
    s.run();
    assert!(s.last_status().unwrap().success);
}
