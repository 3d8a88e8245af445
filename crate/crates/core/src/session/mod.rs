//! The live loop: run a plan motion by motion, pause it, mirror a demonstration, fit
//! and store the skill, and continue with the skill substituted.
//!
//! A [`Session`] is a single-owner state machine. Every phase change goes through the
//! declared [`TRANSITIONS`] table and is appended to [`Session::transitions`]; commands
//! not allowed in the current phase are rejected without touching any state.

pub mod demos;
pub mod recording;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::library::{Anchor, NewPrimitive, SkillLibrary, SkillRecord};
use crate::motion::MotionFunction;
use crate::perception::{detect, localize, DetectorConfig};
use crate::planner::{self, Plan, Planner, PlannerError, WorldModel, HOME_SYMBOL};
use crate::scene::{RobotState, Scene, WorldObject};
use crate::sim::{check_success, reason, MotionResult, SimConfig, Simulator};

pub use recording::{DemoSample, DemonstrationRecording, FitReport, SampleDisposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Planning,
    Executing,
    Paused,
    Demonstrating,
    Fitting,
    AwaitingClarification,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Idle,
        Phase::Planning,
        Phase::Executing,
        Phase::Paused,
        Phase::Demonstrating,
        Phase::Fitting,
        Phase::AwaitingClarification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Planning => "planning",
            Phase::Executing => "executing",
            Phase::Paused => "paused",
            Phase::Demonstrating => "demonstrating",
            Phase::Fitting => "fitting",
            Phase::AwaitingClarification => "awaiting_clarification",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every phase change a session may make.
pub const TRANSITIONS: &[(Phase, Phase)] = &[
    (Phase::Idle, Phase::Planning),
    (Phase::Idle, Phase::Idle),
    (Phase::Planning, Phase::Executing),
    (Phase::Planning, Phase::AwaitingClarification),
    (Phase::Planning, Phase::Idle),
    (Phase::Executing, Phase::Executing),
    (Phase::Executing, Phase::Paused),
    (Phase::Executing, Phase::Idle),
    (Phase::Paused, Phase::Executing),
    (Phase::Paused, Phase::Demonstrating),
    (Phase::Paused, Phase::Idle),
    (Phase::Demonstrating, Phase::Fitting),
    (Phase::Demonstrating, Phase::Paused),
    (Phase::Fitting, Phase::Fitting),
    (Phase::Fitting, Phase::Executing),
    (Phase::Fitting, Phase::Paused),
    (Phase::Fitting, Phase::Idle),
    (Phase::AwaitingClarification, Phase::Planning),
    (Phase::AwaitingClarification, Phase::Idle),
];

pub fn is_declared(from: Phase, to: Phase) -> bool {
    TRANSITIONS.contains(&(from, to))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Submit {
        text: String,
    },
    /// Executes the next motion of the running plan.
    Tick,
    Pause,
    Resume,
    StartDemo,
    Sample(DemoSample),
    FinishDemo,
    /// The demonstration stream went quiet for longer than the gap limit.
    StreamTimeout,
    Commit {
        recording_id: String,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        replace: bool,
    },
    Discard,
    Clarify {
        answer: String,
    },
    Abort,
    /// Restores the initial scene; the library is kept.
    Reset,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Submit { .. } => "submit",
            Command::Tick => "tick",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::StartDemo => "start_demo",
            Command::Sample(_) => "demo_sample",
            Command::FinishDemo => "finish_demo",
            Command::StreamTimeout => "stream_timeout",
            Command::Commit { .. } => "commit",
            Command::Discard => "discard",
            Command::Clarify { .. } => "clarify",
            Command::Abort => "abort",
            Command::Reset => "reset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("`{command}` is not allowed while {phase}")]
    IllegalPhase { command: &'static str, phase: Phase },
    #[error("empty task")]
    EmptyTask,
    #[error("sample rejected: {0}")]
    BadSample(String),
    #[error("{0}")]
    BadAnswer(String),
    #[error("unknown recording `{0}`")]
    UnknownRecording(String),
    #[error("commit refused: {0}")]
    CommitRefused(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cursor {
    pub subtask: usize,
    pub motion: usize,
}

/// How the last task ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task_text: String,
    /// The plan compiled and bound.
    pub executable: bool,
    /// Every motion ran without failure.
    pub executed: bool,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub per_motion_results: Vec<MotionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub task_text: String,
    pub question: String,
    pub phrase: String,
    pub candidates: Vec<String>,
}

/// One fitted primitive of a finished recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSegment {
    pub name_suffix: String,
    pub samples: (usize, usize),
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingView {
    pub id: String,
    pub samples: usize,
    pub duration: f64,
    pub subject_subtask: Option<String>,
    pub proposed_skill_name: Option<String>,
    pub warnings: Vec<String>,
    /// Fit outcome once the recording is finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<Result<Vec<FittedSegment>, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_as: Option<String>,
}

/// Snapshot served by `GET /state` and carried in `state` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub task_text: Option<String>,
    pub current_plan: Option<Plan>,
    pub cursor: Cursor,
    pub pending_question: Option<String>,
    pub candidates: Vec<String>,
    pub recording: Option<RecordingView>,
    pub last_status: Option<TaskStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLevel {
    Info,
    Warn,
    Error,
}

/// Server-to-client stream frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    State(Box<SessionState>),
    SceneDelta { t: f64, motion: String, robot: RobotState, changed_objects: Vec<WorldObject> },
    Log { level: LogLevel, message: String },
    Question { question: String, candidates: Vec<String> },
}

/// Client-to-server stream frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    DemoSample(DemoSample),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: Phase,
    pub to: Phase,
    pub command: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub detector: DetectorConfig,
    pub seed: u64,
    pub sim: SimConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { detector: DetectorConfig::noiseless(), seed: 0, sim: SimConfig::default() }
    }
}

#[derive(Debug, Clone)]
struct ActiveTask {
    plan: Plan,
    world: WorldModel,
    /// Scene when the task was submitted, for the success check.
    before: Scene,
    cursor: Cursor,
    results: Vec<MotionResult>,
}

#[derive(Debug, Clone)]
struct Fitted {
    recording: DemonstrationRecording,
    subject_index: usize,
    result: Result<Vec<(FittedSegment, crate::Dmp)>, String>,
    committed: Option<SkillRecord>,
}

/// Single-owner session state machine.
#[derive(Debug, Clone)]
pub struct Session {
    phase: Phase,
    planner: Planner,
    library: SkillLibrary,
    config: SessionConfig,
    initial_scene: Scene,
    sim: Simulator,
    rng: ChaCha8Rng,
    active: Option<ActiveTask>,
    pending: Option<PendingQuestion>,
    pending_world: Option<WorldModel>,
    demo: Option<(DemonstrationRecording, usize)>,
    fitted: Option<Fitted>,
    recordings_started: usize,
    status: Option<TaskStatus>,
    transitions: Vec<TransitionRecord>,
    outbox: Vec<ServerFrame>,
}

impl Session {
    pub fn new(scene: Scene, library: SkillLibrary, planner: Planner, config: SessionConfig) -> Self {
        Session {
            phase: Phase::Idle,
            planner,
            library,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            sim: Simulator::new(scene.clone(), config.sim.clone()),
            initial_scene: scene,
            config,
            active: None,
            pending: None,
            pending_world: None,
            demo: None,
            fitted: None,
            recordings_started: 0,
            status: None,
            transitions: Vec::new(),
            outbox: Vec::new(),
        }
    }

    /// Noiseless session with the rule-based planner.
    pub fn with_defaults(scene: Scene, library: SkillLibrary) -> Self {
        Self::new(scene, library, Planner::default(), SessionConfig::default())
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn library(&self) -> &SkillLibrary {
        &self.library
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn scene(&self) -> &Scene {
        self.sim.scene()
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.active.as_ref().map(|a| &a.plan)
    }

    pub fn cursor(&self) -> Cursor {
        self.active.as_ref().map(|a| a.cursor).unwrap_or_default()
    }

    pub fn last_status(&self) -> Option<&TaskStatus> {
        self.status.as_ref()
    }

    pub fn transitions(&self) -> &[TransitionRecord] {
        &self.transitions
    }

    /// Latest recording, finished or in progress.
    pub fn recording(&self) -> Option<&DemonstrationRecording> {
        self.demo.as_ref().map(|(r, _)| r).or(self.fitted.as_ref().map(|f| &f.recording))
    }

    pub fn drain_frames(&mut self) -> Vec<ServerFrame> {
        std::mem::take(&mut self.outbox)
    }

    pub fn state(&self) -> SessionState {
        let recording = if let Some((r, _)) = &self.demo {
            Some(recording_view(r, None, None))
        } else {
            self.fitted.as_ref().map(|f| {
                let fit = f.result.as_ref().map(|segs| segs.iter().map(|(s, _)| s.clone()).collect()).map_err(Clone::clone);
                recording_view(&f.recording, Some(fit), f.committed.as_ref().map(|c| c.name.clone()))
            })
        };
        SessionState {
            phase: self.phase,
            task_text: self
                .active
                .as_ref()
                .map(|a| a.plan.task_text.clone())
                .or(self.pending.as_ref().map(|p| p.task_text.clone())),
            current_plan: self.plan().cloned(),
            cursor: self.cursor(),
            pending_question: self.pending.as_ref().map(|p| p.question.clone()),
            candidates: self.pending.as_ref().map(|p| p.candidates.clone()).unwrap_or_default(),
            recording,
            last_status: self.status.clone(),
        }
    }

    fn go(&mut self, to: Phase, command: &'static str) {
        let from = self.phase;
        debug_assert!(is_declared(from, to), "undeclared transition {from} -> {to}");
        self.transitions.push(TransitionRecord { from, to, command });
        self.phase = to;
        self.outbox.push(ServerFrame::State(Box::new(self.state())));
    }

    fn log(&mut self, level: LogLevel, message: impl Into<String>) {
        self.outbox.push(ServerFrame::Log { level, message: message.into() });
    }

    fn illegal(&self, c: &Command) -> SessionError {
        SessionError::IllegalPhase { command: c.name(), phase: self.phase }
    }

    /// Applies one command. Rejected commands leave the session untouched.
    pub fn handle(&mut self, command: Command) -> Result<(), SessionError> {
        use Phase::*;
        match (&command, self.phase) {
            (Command::Submit { text }, Idle) => self.submit(text.clone()),
            (Command::Tick, Executing) => {
                self.tick();
                Ok(())
            }
            (Command::Pause, Executing) => {
                self.go(Paused, "pause");
                Ok(())
            }
            (Command::Resume, Paused | Fitting) => {
                self.resume();
                Ok(())
            }
            (Command::StartDemo, Paused) => {
                self.start_demo();
                Ok(())
            }
            (Command::Sample(s), Demonstrating) => self.sample(*s).map(|_| ()),
            (Command::FinishDemo, Demonstrating) => {
                self.finish_demo();
                Ok(())
            }
            (Command::StreamTimeout, Demonstrating) => {
                self.demo = None;
                self.log(LogLevel::Warn, "demonstration stream went quiet; recording aborted");
                self.go(Paused, "stream_timeout");
                Ok(())
            }
            (Command::Commit { recording_id, name, replace }, Fitting) => {
                self.commit(recording_id, name.as_deref(), *replace).map(|_| ())
            }
            (Command::Discard, Fitting) => {
                self.fitted = None;
                self.log(LogLevel::Info, "recording discarded");
                self.go(Paused, "discard");
                Ok(())
            }
            (Command::Clarify { answer }, AwaitingClarification) => self.clarify(answer),
            (Command::Abort, Executing | Paused | Fitting | AwaitingClarification) => {
                self.active = None;
                self.pending = None;
                self.pending_world = None;
                self.fitted = None;
                self.log(LogLevel::Info, "task aborted");
                self.go(Idle, "abort");
                Ok(())
            }
            (Command::Reset, Idle) => {
                self.sim = Simulator::new(self.initial_scene.clone(), self.config.sim.clone());
                self.active = None;
                self.status = None;
                self.go(Idle, "reset");
                Ok(())
            }
            _ => Err(self.illegal(&command)),
        }
    }

    /// Ticks until the plan stops executing; returns the final phase.
    pub fn run(&mut self) -> Phase {
        while self.phase == Phase::Executing {
            self.tick();
        }
        self.phase
    }

    fn perceive(&mut self) -> Result<WorldModel, String> {
        let scene = self.sim.scene();
        let detections = detect(scene, &self.config.detector, &mut self.rng);
        let objects = localize(&detections, &scene.camera, scene.lateral_axis).map_err(|e| e.to_string())?;
        Ok(WorldModel::new(scene, objects))
    }

    fn submit(&mut self, text: String) -> Result<(), SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyTask);
        }
        self.status = None;
        self.go(Phase::Planning, "submit");
        let world = match self.perceive() {
            Ok(w) => w,
            Err(e) => {
                self.plan_failed(&text, format!("perception: {e}"));
                return Ok(());
            }
        };
        self.plan_and_start(text, world, "submit");
        Ok(())
    }

    fn plan_and_start(&mut self, text: String, world: WorldModel, command: &'static str) {
        match self.planner.plan_task(&text, &world, &self.library) {
            Ok(plan) => {
                self.log(LogLevel::Info, format!("plan:\n{}", plan.to_dsl()));
                let before = self.sim.scene().clone();
                self.active = Some(ActiveTask { plan, world, before, cursor: Cursor::default(), results: Vec::new() });
                self.go(Phase::Executing, command);
            }
            Err(PlannerError::Clarification { question, phrase, candidates }) => {
                self.outbox.push(ServerFrame::Question { question: question.clone(), candidates: candidates.clone() });
                self.pending = Some(PendingQuestion { task_text: text, question, phrase, candidates });
                // The answer is resolved against the world the question was asked about.
                self.pending_world = Some(world);
                self.go(Phase::AwaitingClarification, command);
            }
            Err(e) => self.plan_failed(&text, e.to_string()),
        }
    }

    fn plan_failed(&mut self, text: &str, why: String) {
        self.log(LogLevel::Error, format!("plan not executable: {why}"));
        self.status = Some(TaskStatus {
            task_text: text.trim().to_string(),
            executable: false,
            executed: false,
            success: false,
            failure_reason: Some(why),
            per_motion_results: Vec::new(),
        });
        self.go(Phase::Idle, "submit");
    }

    fn clarify(&mut self, answer: &str) -> Result<(), SessionError> {
        let (Some(p), Some(world)) = (&self.pending, &self.pending_world) else {
            return Err(SessionError::BadAnswer(answer.to_string()));
        };
        let text =
            Planner::clarify(&p.task_text, &p.phrase, answer, world).map_err(|e| SessionError::BadAnswer(e.to_string()))?;
        let world = self.pending_world.take().expect("checked above");
        self.pending = None;
        self.log(LogLevel::Info, format!("clarified task: {text}"));
        self.go(Phase::Planning, "clarify");
        self.plan_and_start(text, world, "clarify");
        Ok(())
    }

    fn tick(&mut self) {
        let a = self.active.as_mut().expect("executing implies a plan");
        while a.plan.subtasks.get(a.cursor.subtask).is_some_and(|s| a.cursor.motion >= s.motions.len()) {
            a.cursor = Cursor { subtask: a.cursor.subtask + 1, motion: 0 };
        }
        let Some(st) = a.plan.subtasks.get(a.cursor.subtask) else {
            self.finish_task();
            return;
        };
        let m = st.motions[a.cursor.motion].clone();
        let description = st.description.clone();
        let r = self.sim.execute_motion(&m, &a.plan.bound_symbols, &self.library);
        a.results.push(r.clone());
        a.cursor.motion += 1;
        let ev = self.sim.events().last().expect("motion logged").clone();
        self.outbox.push(ServerFrame::SceneDelta {
            t: ev.t,
            motion: ev.motion,
            robot: ev.robot,
            changed_objects: ev.changed_objects,
        });
        if !r.ok {
            let why = format!("{description}: {}: {}", r.motion, r.reason.unwrap_or_default());
            self.end_task(false, Some(why));
            return;
        }
        let a = self.active.as_ref().expect("still executing");
        let done = a.plan.subtasks[a.cursor.subtask..].iter().enumerate().all(|(i, s)| {
            if i == 0 {
                a.cursor.motion >= s.motions.len()
            } else {
                s.motions.is_empty()
            }
        });
        if done {
            self.finish_task();
        } else {
            self.go(Phase::Executing, "tick");
        }
    }

    fn finish_task(&mut self) {
        let a = self.active.as_ref().expect("executing implies a plan");
        match check_success(&a.plan.task_text, &a.before, self.sim.scene()) {
            Ok(true) => self.end_task(true, None),
            Ok(false) => self.end_task(true, Some(reason::PREDICATE_UNMET.to_string())),
            Err(e) => self.end_task(true, Some(format!("{}: {e}", reason::UNKNOWN_PREDICATE))),
        }
    }

    fn end_task(&mut self, executed: bool, failure: Option<String>) {
        let a = self.active.take().expect("executing implies a plan");
        let success = executed && failure.is_none();
        match &failure {
            None => self.log(LogLevel::Info, format!("task succeeded: {}", a.plan.task_text)),
            Some(why) => self.log(LogLevel::Error, format!("task failed: {why}")),
        }
        self.status = Some(TaskStatus {
            task_text: a.plan.task_text.clone(),
            executable: true,
            executed,
            success,
            failure_reason: failure,
            per_motion_results: a.results,
        });
        self.go(Phase::Idle, "tick");
    }

    fn resume(&mut self) {
        let fitted = self.fitted.take();
        let a = self.active.as_mut().expect("paused implies a plan");
        let mut first = a.cursor.subtask;
        if let Some(f) = fitted.filter(|f| f.committed.is_some()) {
            // The demonstration carried out the subject sub-task, so execution picks up after it.
            a.cursor = Cursor { subtask: f.subject_index + 1, motion: 0 };
            first = f.subject_index;
        }
        let mut swapped = Vec::new();
        for i in first..a.plan.subtasks.len() {
            if let Some(st) = planner::resubstitute(&a.plan.subtasks[i], &self.library) {
                swapped.push(st.description.clone());
                a.plan.subtasks[i] = st;
                if i == a.cursor.subtask {
                    a.cursor.motion = 0;
                }
            }
        }
        if !swapped.is_empty() {
            if let Err(e) = planner::bind(&mut a.plan, &a.world, &self.library) {
                let why = e.to_string();
                self.log(LogLevel::Error, format!("recompiled plan not executable: {why}"));
                self.go(Phase::Executing, "resume");
                self.end_task(false, Some(why));
                return;
            }
            let msg = format!("recompiled with stored skills: {}", swapped.join(", "));
            self.log(LogLevel::Info, msg);
        }
        self.go(Phase::Executing, "resume");
    }

    fn start_demo(&mut self) {
        let a = self.active.as_ref().expect("paused implies a plan");
        let index = a.cursor.subtask.min(a.plan.subtasks.len().saturating_sub(1));
        let subject = a.plan.subtasks.get(index);
        let replaced = subject.map(|st| match st.skill_name.as_deref().and_then(|n| self.library.skill(n)) {
            Some(rec) if st.uses_dmp() => rec.replaced_motions.clone(),
            _ => st.motions.clone(),
        });
        let replaced = replaced.unwrap_or_default();
        let proposed = subject.and_then(|st| planner::propose_skill_name(&st.description, &replaced).ok());
        let anchor = replaced
            .iter()
            .find(|m| m.kind.takes_position() && m.arg != HOME_SYMBOL)
            .and_then(|m| a.plan.bound_symbols.get(&m.arg).map(|b| (m.arg.clone(), b)))
            .and_then(|(symbol, b)| self.sim.anchor_point(b).ok().map(|position| Anchor { symbol, position }));
        self.recordings_started += 1;
        let rec = DemonstrationRecording {
            id: format!("rec-{}", self.recordings_started),
            samples: Vec::new(),
            subject_subtask: subject.map(|s| s.description.clone()),
            proposed_skill_name: proposed,
            replaced_motions: replaced,
            anchor,
            warnings: Vec::new(),
        };
        self.log(LogLevel::Info, format!("recording {} started", rec.id));
        self.demo = Some((rec, index));
        self.go(Phase::Demonstrating, "start_demo");
    }

    fn sample(&mut self, s: DemoSample) -> Result<SampleDisposition, SessionError> {
        let (rec, _) = self.demo.as_ref().expect("demonstrating implies a recording");
        let finite = [s.t, s.x, s.y, s.z, s.aperture].iter().all(|v| v.is_finite());
        if !finite {
            return Err(SessionError::BadSample("non-finite value".into()));
        }
        let first_t = rec.samples.first().map(|f| f.t);
        let prev_t = rec.samples.last().map_or(s.t, |l| l.t);
        if let Some(first_t) = first_t {
            if s.t <= prev_t {
                return Err(SessionError::BadSample(format!("timestamp {} not after {prev_t}", s.t)));
            }
            if s.t - first_t > recording::MAX_DURATION {
                return Err(SessionError::BadSample(format!("recording longer than {} s", recording::MAX_DURATION)));
            }
            if s.t - prev_t > recording::MAX_GAP {
                self.demo = None;
                self.log(LogLevel::Warn, format!("stream gap of {:.2} s; recording aborted", s.t - prev_t));
                self.go(Phase::Paused, "demo_sample");
                return Ok(SampleDisposition::Dropped);
            }
            if s.t - prev_t < 1.0 / recording::MAX_RATE_HZ - 1e-9 {
                return Ok(SampleDisposition::Dropped);
            }
        }
        let before = self.sim.scene().objects.clone();
        let start_t = self.sim.time();
        let m = self.sim.mirror_sample(Vec3::new(s.x, s.y, s.z), s.aperture);
        self.sim.set_time(start_t + (s.t - prev_t));
        self.sim.log_event("demo_sample", &before);
        let ev = self.sim.events().last().expect("event logged").clone();
        self.outbox.push(ServerFrame::SceneDelta {
            t: ev.t,
            motion: ev.motion,
            robot: ev.robot,
            changed_objects: ev.changed_objects,
        });
        let recorded =
            DemoSample { t: s.t, x: m.position.x, y: m.position.y, z: m.position.z, aperture: s.aperture.clamp(0.0, 1.0) };
        let (rec, _) = self.demo.as_mut().expect("still demonstrating");
        rec.samples.push(recorded);
        if m.clamped {
            let w = format!("sample at t={} clamped to the reach envelope", s.t);
            rec.warnings.push(w.clone());
            self.log(LogLevel::Warn, w);
            return Ok(SampleDisposition::Clamped);
        }
        Ok(SampleDisposition::Recorded)
    }

    fn finish_demo(&mut self) {
        let (rec, index) = self.demo.take().expect("demonstrating implies a recording");
        if rec.samples.len() < recording::MIN_SAMPLES {
            self.log(
                LogLevel::Error,
                format!("recording {} has {} samples; at least {} needed", rec.id, rec.samples.len(), recording::MIN_SAMPLES),
            );
            self.go(Phase::Paused, "finish_demo");
            return;
        }
        let result = fit_recording(&rec);
        match &result {
            Ok(segs) => self.log(LogLevel::Info, format!("recording {} fitted as {} primitive(s)", rec.id, segs.len())),
            Err(e) => self.log(LogLevel::Error, format!("recording {} cannot be fitted: {e}", rec.id)),
        }
        if let Some(name) = &rec.proposed_skill_name {
            self.outbox.push(ServerFrame::Question {
                question: format!("Store the demonstration as `{name}`?"),
                candidates: vec![name.clone()],
            });
        }
        self.fitted = Some(Fitted { recording: rec, subject_index: index, result, committed: None });
        self.go(Phase::Fitting, "finish_demo");
    }

    fn commit(&mut self, recording_id: &str, name: Option<&str>, replace: bool) -> Result<SkillRecord, SessionError> {
        let f = self.fitted.as_ref().expect("fitting implies a recording");
        if f.recording.id != recording_id {
            return Err(SessionError::UnknownRecording(recording_id.to_string()));
        }
        if f.committed.is_some() {
            return Err(SessionError::CommitRefused(format!("recording {recording_id} already committed")));
        }
        let segs = f.result.as_ref().map_err(|e| SessionError::CommitRefused(e.clone()))?;
        let name = name
            .map(str::to_string)
            .or(f.recording.proposed_skill_name.clone())
            .ok_or_else(|| SessionError::CommitRefused("no skill name given and none could be proposed".into()))?;
        let names = recording::segment_names(&name, segs.len());
        let primitives: Vec<NewPrimitive> =
            names.iter().zip(segs).map(|(n, (_, m))| NewPrimitive { name: n.clone(), model: m.clone() }).collect();
        let motions = names.iter().map(MotionFunction::dmp).collect();
        let rec = self
            .library
            .commit(
                &name,
                motions,
                f.recording.replaced_motions.clone(),
                recording_id,
                primitives,
                f.recording.anchor.clone(),
                replace,
            )
            .map_err(|e| SessionError::CommitRefused(e.to_string()))?;
        self.log(LogLevel::Info, format!("stored skill {} (version {})", rec.name, rec.version));
        let f = self.fitted.as_mut().expect("checked above");
        f.committed = Some(rec.clone());
        self.go(Phase::Fitting, "commit");
        Ok(rec)
    }
}

fn recording_view(
    r: &DemonstrationRecording,
    fit: Option<Result<Vec<FittedSegment>, String>>,
    committed_as: Option<String>,
) -> RecordingView {
    RecordingView {
        id: r.id.clone(),
        samples: r.samples.len(),
        duration: r.duration(),
        subject_subtask: r.subject_subtask.clone(),
        proposed_skill_name: r.proposed_skill_name.clone(),
        warnings: r.warnings.clone(),
        fit,
        committed_as,
    }
}

/// Segments a finished recording and fits one primitive per segment.
pub fn fit_recording(rec: &DemonstrationRecording) -> Result<Vec<(FittedSegment, crate::Dmp)>, String> {
    let bounds = recording::segment_bounds(&rec.samples);
    let names = recording::segment_names("", bounds.len());
    let mut out = Vec::with_capacity(bounds.len());
    for ((lo, hi), suffix) in bounds.into_iter().zip(names) {
        let traj = recording::segment_trajectory(&rec.samples[lo..=hi]).map_err(|e| format!("segment {lo}..{hi}: {e}"))?;
        match recording::fit_segment(&traj) {
            Ok((model, report)) => out.push((FittedSegment { name_suffix: suffix, samples: (lo, hi), report }, model)),
            Err((e, report)) => {
                let detail = report
                    .map(|r| format!(" (rmse {:?}, range {:?}, endpoint error {:?})", r.rmse, r.range, r.endpoint_error))
                    .unwrap_or_default();
                return Err(format!("segment {lo}..{hi}: {e}{detail}"));
            }
        }
    }
    Ok(out)
}
