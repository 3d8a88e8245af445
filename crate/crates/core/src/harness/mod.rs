//! Repeated randomized trials scored for executability, feasibility and success.
//!
//! Every trial perceives the scene twice with the same seed: once with the configured
//! detector noise and once noiselessly. Misses come from the same random draws in both,
//! so the noiseless twin sees exactly the objects the noisy run saw.

mod report;
mod study;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::library::{LibraryError, SkillLibrary};
use crate::perception::{detect, localize, DetectorConfig};
use crate::planner::{Plan, PlanFaults, Planner, WorldModel};
use crate::scene::{builtin, Scene, SceneError};
use crate::session::demos::{build_scripted_library, TeachError};
use crate::sim::{run_plan, ExecutionOutcome, SimConfig, Simulator};

pub use report::{emit_report, MetricsReport, MetricsRow, ReportFormat};
pub use study::{perception_discrepancy_study, DiscrepancyStats, DiscrepancyStudy, STUDY_RATE_HZ};

/// `dmp_library` value that teaches the door skills by scripted demonstration.
pub const SCRIPTED_LIBRARY: &str = "@scripted";
/// `scene_file` prefix for the bundled scenes.
pub const BUILTIN_SCENE: &str = builtin::PREFIX;
/// Odd increment spreading trial seeds across the seed space.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
/// Keeps the planner's fault draws independent of the detector's.
const PLAN_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read task suite {path}: {source}")]
    SuiteIo { path: String, source: std::io::Error },
    #[error("invalid task suite: {0}")]
    SuiteJson(#[from] serde_json::Error),
    #[error("task `{task}`: {source}")]
    Scene { task: String, source: SceneError },
    #[error("task `{task}`: unknown builtin scene `{name}`")]
    UnknownScene { task: String, name: String },
    #[error("task `{task}`: {source}")]
    Library { task: String, source: LibraryError },
    #[error("task `{task}`: DMP library directory {dir} does not exist")]
    MissingLibrary { task: String, dir: String },
    #[error("task `{task}`: {source}")]
    Teach { task: String, source: TeachError },
    #[error("task suite has no tasks")]
    EmptySuite,
    #[error("number of trials must be at least 1")]
    NoTrials,
    #[error("report has no rows")]
    EmptyReport,
    #[error("unknown report format `{0}` (expected csv or text)")]
    UnknownFormat(String),
    #[error("no detections in the study window")]
    NoDetections,
    #[error("invalid study window: {0}")]
    BadWindow(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn default_scene() -> String {
    format!("{BUILTIN_SCENE}kitchen")
}

fn default_noise() -> f64 {
    DetectorConfig::default().noise_half_width
}

fn default_miss() -> f64 {
    DetectorConfig::default().miss_probability
}

/// One task of a suite. Trials of a spec differ only by seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    /// Row name in the report.
    pub label: String,
    pub task_text: String,
    /// `builtin:<name>` or a path, relative paths being taken from the suite's directory.
    #[serde(default = "default_scene")]
    pub scene_file: String,
    /// Detector noise half-width per axis, metres.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_miss")]
    pub miss_probability: f64,
    #[serde(default)]
    pub seed: u64,
    /// A library directory, [`SCRIPTED_LIBRARY`], or nothing for an empty library.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmp_library: Option<String>,
    #[serde(default, skip_serializing_if = "PlanFaults::is_none")]
    pub faults: PlanFaults,
    /// Overrides the experiment's trial count for this task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl TrialSpec {
    pub fn new(label: &str, task_text: &str) -> Self {
        TrialSpec {
            label: label.to_string(),
            task_text: task_text.to_string(),
            scene_file: default_scene(),
            noise: default_noise(),
            miss_probability: default_miss(),
            seed: 0,
            dmp_library: None,
            faults: PlanFaults::default(),
            trials: None,
        }
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig { noise_half_width: self.noise, miss_probability: self.miss_probability }
    }
}

/// The JSON task-suite file: `{"tasks": [TrialSpec, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub tasks: Vec<TrialSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl TaskSuite {
    pub fn new(tasks: Vec<TrialSpec>) -> Self {
        TaskSuite { tasks, base_dir: PathBuf::from(".") }
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut suite: TaskSuite = serde_json::from_str(text)?;
        suite.base_dir = base_dir.into();
        Ok(suite)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| HarnessError::SuiteIo { path: path.display().to_string(), source })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// The seven benchmark tasks.
    pub fn benchmark() -> Self {
        Self::from_json(suites::BENCHMARK, ".").expect("bundled suite parses")
    }

    /// The with/without demonstration contrast for the two door tasks.
    pub fn door_contrast() -> Self {
        Self::from_json(suites::DOOR_CONTRAST, ".").expect("bundled suite parses")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tasks.iter_mut().for_each(|t| t.seed = seed);
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.tasks.iter_mut().for_each(|t| t.noise = noise);
        self
    }

    fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Bundled suite files.
pub mod suites {
    pub const BENCHMARK: &str = include_str!("../../assets/suites/benchmark.json");
    pub const DOOR_CONTRAST: &str = include_str!("../../assets/suites/door_contrast.json");
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task: String,
    pub trial: usize,
    pub seed: u64,
    /// The noisy plan compiled and bound.
    pub executable: bool,
    /// The noiseless twin's plan ran to success.
    pub feasible: bool,
    /// The noisy plan ran to success.
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub report: MetricsReport,
}

/// Seed of trial `i` for a spec seeded with `base`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add((i as u64).wrapping_mul(SEED_STRIDE))
}

struct Prepared<'a> {
    spec: &'a TrialSpec,
    scene: Scene,
    library: SkillLibrary,
    trials: usize,
}

fn load_scene(suite: &TaskSuite, spec: &TrialSpec) -> Result<Scene, HarnessError> {
    let scene_err = |source| HarnessError::Scene { task: spec.label.clone(), source };
    match spec.scene_file.strip_prefix(BUILTIN_SCENE) {
        Some(name) => {
            let text = builtin::by_name(name)
                .ok_or_else(|| HarnessError::UnknownScene { task: spec.label.clone(), name: name.to_string() })?;
            Scene::from_json(text).map_err(scene_err)
        }
        None => Scene::load(suite.resolve(&spec.scene_file)).map_err(scene_err),
    }
}

/// Loads every scene and library up front so a bad file stops the run before any trial.
fn prepare<'a>(suite: &'a TaskSuite, n_trials: usize) -> Result<Vec<Prepared<'a>>, HarnessError> {
    let mut scripted: BTreeMap<String, SkillLibrary> = BTreeMap::new();
    let mut out = Vec::with_capacity(suite.tasks.len());
    for spec in &suite.tasks {
        let scene = load_scene(suite, spec)?;
        let library = match spec.dmp_library.as_deref() {
            None => SkillLibrary::in_memory(),
            Some(SCRIPTED_LIBRARY) => match scripted.get(&spec.scene_file) {
                Some(lib) => lib.clone(),
                None => {
                    let lib = build_scripted_library(&scene, SkillLibrary::in_memory())
                        .map_err(|source| HarnessError::Teach { task: spec.label.clone(), source })?;
                    scripted.insert(spec.scene_file.clone(), lib.clone());
                    lib
                }
            },
            Some(dir) => {
                let dir = suite.resolve(dir);
                if !dir.is_dir() {
                    return Err(HarnessError::MissingLibrary { task: spec.label.clone(), dir: dir.display().to_string() });
                }
                SkillLibrary::open(&dir).map_err(|source| HarnessError::Library { task: spec.label.clone(), source })?
            }
        };
        out.push(Prepared { spec, scene, library, trials: spec.trials.unwrap_or(n_trials) });
    }
    Ok(out)
}

fn perceive(scene: &Scene, detector: &DetectorConfig, seed: u64) -> Result<WorldModel, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detections = detect(scene, detector, &mut rng);
    let objects = localize(&detections, &scene.camera, scene.lateral_axis).map_err(|e| format!("perception: {e}"))?;
    Ok(WorldModel::new(scene, objects))
}

/// Plans from one perception of the scene and executes the plan.
/// `Err` means no executable plan came out; `Ok` carries the run's outcome.
fn attempt(p: &Prepared, planner: &Planner, detector: &DetectorConfig, seed: u64) -> Result<(bool, Option<String>), String> {
    let world = perceive(&p.scene, detector, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PLAN_STREAM);
    let plan =
        planner.plan_with_faults(&p.spec.task_text, &world, &p.library, &p.spec.faults, &mut rng).map_err(|e| e.to_string())?;
    let (outcome, _) = run_plan(&plan, &p.scene, &p.library, &SimConfig::default());
    Ok((outcome.task_success, outcome.failure_reason))
}

fn run_trial(p: &Prepared, planner: &Planner, trial: usize) -> TrialRecord {
    let seed = trial_seed(p.spec.seed, trial);
    let twin = DetectorConfig { noise_half_width: 0.0, ..p.spec.detector() };
    let noisy = attempt(p, planner, &p.spec.detector(), seed);
    let feasible = matches!(attempt(p, planner, &twin, seed), Ok((true, _)));
    let (executable, success, failure_reason) = match noisy {
        Ok((ok, reason)) => (true, ok, reason),
        Err(reason) => (false, false, Some(reason)),
    };
    TrialRecord { task: p.spec.label.clone(), trial, seed, executable, feasible, success, failure_reason }
}

/// One perceive, plan and execute pass.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub plan: Plan,
    pub outcome: ExecutionOutcome,
    /// Simulator after the run, holding the final scene and the event log.
    pub simulator: Simulator,
}

/// Perceives `scene` with `detector` seeded by `seed`, plans `task` and runs the plan.
/// `Err` means no executable plan came out.
pub fn simulate(
    scene: &Scene,
    task: &str,
    library: &SkillLibrary,
    planner: &Planner,
    detector: &DetectorConfig,
    seed: u64,
) -> Result<Simulation, String> {
    let world = perceive(scene, detector, seed)?;
    let plan = planner.plan_task(task, &world, library).map_err(|e| e.to_string())?;
    let (outcome, simulator) = run_plan(&plan, scene, library, &SimConfig::default());
    Ok(Simulation { plan, outcome, simulator })
}

/// Runs every task of `suite` for `n_trials` trials with the rule-based planner.
pub fn run_experiment(suite: &TaskSuite, n_trials: usize) -> Result<Experiment, HarnessError> {
    run_experiment_with(suite, n_trials, &Planner::default())
}

pub fn run_experiment_with(suite: &TaskSuite, n_trials: usize, planner: &Planner) -> Result<Experiment, HarnessError> {
    if n_trials == 0 || suite.tasks.iter().any(|t| t.trials == Some(0)) {
        return Err(HarnessError::NoTrials);
    }
    if suite.tasks.is_empty() {
        return Err(HarnessError::EmptySuite);
    }
    let prepared = prepare(suite, n_trials)?;
    let jobs: Vec<(usize, usize)> = prepared.iter().enumerate().flat_map(|(k, p)| (0..p.trials).map(move |i| (k, i))).collect();
    let records: Vec<TrialRecord> = jobs.par_iter().map(|&(k, i)| run_trial(&prepared[k], planner, i)).collect();
    let labels: Vec<&str> = suite.tasks.iter().map(|t| t.label.as_str()).collect();
    let report = MetricsReport::from_records(&labels, &records);
    Ok(Experiment { records, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_suites_parse() {
        let t1 = TaskSuite::benchmark();
        assert_eq!(t1.tasks.len(), 7);
        assert!(t1.tasks.iter().all(|t| t.trials.is_none()));
        let t2 = TaskSuite::door_contrast();
        assert_eq!(t2.tasks.len(), 4);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(trial_seed(7, 0), 7);
    }

    #[test]
    fn spec_defaults_fill_in() {
        let s: TrialSpec = serde_json::from_str(r#"{"label":"x","task_text":"Open the microwave"}"#).unwrap();
        assert_eq!(s, TrialSpec::new("x", "Open the microwave"));
    }

    #[test]
    fn simulate_runs_one_task() {
        let scene = Scene::from_json(builtin::KITCHEN).unwrap();
        let lib = SkillLibrary::in_memory();
        let run = simulate(&scene, "Open the microwave", &lib, &Planner::default(), &DetectorConfig::noiseless(), 1).unwrap();
        assert!(run.outcome.task_success);
        assert_eq!(run.simulator.events().len(), run.plan.motions().count());
        let err = simulate(&scene, "Juggle the moon", &lib, &Planner::default(), &DetectorConfig::noiseless(), 1).unwrap_err();
        assert!(!err.is_empty());
    }

    #[test]
    fn zero_trials_is_refused() {
        assert!(matches!(run_experiment(&TaskSuite::benchmark(), 0), Err(HarnessError::NoTrials)));
    }

    #[test]
    fn bad_scene_aborts_before_trials() {
        let mut spec = TrialSpec::new("x", "Open the microwave");
        spec.scene_file = "builtin:attic".into();
        let err = run_experiment(&TaskSuite::new(vec![spec]), 1).unwrap_err();
        assert!(matches!(err, HarnessError::UnknownScene { .. }));
    }
}
