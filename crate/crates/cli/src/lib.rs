//! `hrc` subcommands. Each writes its primary output to `out` and progress or
//! summaries to `err`, and returns the process exit status.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hrc_core::harness::{self, emit_report, perception_discrepancy_study, run_experiment_with, ReportFormat, TaskSuite};
use hrc_core::perception::DetectorConfig;
use hrc_core::planner::{Planner, RemoteBackend, RemoteConfig};
use hrc_core::session::demos::build_scripted_library;
use hrc_core::session::{Session, SessionConfig};
use hrc_core::{Scene, SkillLibrary};
use hrc_server::{AppState, ServerConfig};

/// Task passed, or the command finished.
pub const EXIT_OK: u8 = 0;
/// The simulated task did not succeed.
pub const EXIT_TASK_FAILED: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "hrc", version, about = "Language-planned kitchen tasks with taught movement primitives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Perceive, plan and execute one task; writes the event log.
    Simulate(SimulateArgs),
    /// Run a task suite and write the metrics report.
    Bench(BenchArgs),
    /// Measure detection error against ground truth.
    Study(StudyArgs),
    /// Store the scripted door demonstrations as skills in a library directory.
    Teach(TeachArgs),
    /// Serve the session endpoints and stream.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PlannerArgs {
    /// Chat-completions URL; the rule-based planner is used when absent.
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    #[arg(long, requires = "llm_endpoint", default_value = "gpt-4")]
    pub llm_model: String,
}

impl PlannerArgs {
    pub fn planner(&self) -> Planner {
        match &self.llm_endpoint {
            Some(url) => Planner::new(Arc::new(RemoteBackend::new(RemoteConfig::new(url.clone(), self.llm_model.clone())))),
            None => Planner::default(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scene file, or `builtin:<name>`.
    #[arg(long, default_value = "builtin:kitchen")]
    pub scene: String,
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub dmp_lib: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Detector noise half-width in metres.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub miss: f64,
    /// Event log destination; standard output when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Task-suite JSON, or `builtin:benchmark` / `builtin:door_contrast`.
    #[arg(long, default_value = "builtin:benchmark")]
    pub tasks: String,
    #[arg(long, default_value_t = 23)]
    pub trials: usize,
    /// Overrides every task's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides every task's noise half-width.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` or `text`.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Per-trial records as JSON lines.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, default_value = "builtin:kitchen")]
    pub scene: String,
    #[arg(long, default_value_t = 0.011)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.02)]
    pub miss: f64,
    #[arg(long, default_value_t = 5.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TeachArgs {
    #[arg(long, default_value = "builtin:kitchen")]
    pub scene: String,
    #[arg(long)]
    pub dmp_lib: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "builtin:kitchen")]
    pub scene: String,
    /// Library directory; skills are kept in memory when absent.
    #[arg(long)]
    pub dmp_lib: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub miss: f64,
    /// Milliseconds between executed motions.
    #[arg(long, default_value_t = 100)]
    pub tick_ms: u64,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

fn scene(arg: &str) -> Result<Scene> {
    Scene::open(arg).with_context(|| format!("loading scene {arg}"))
}

fn library(dir: Option<&Path>) -> Result<SkillLibrary> {
    match dir {
        Some(d) => SkillLibrary::open(d).with_context(|| format!("opening DMP library {}", d.display())),
        None => Ok(SkillLibrary::in_memory()),
    }
}

fn write_to(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let scene = scene(&a.scene)?;
    let lib = library(a.dmp_lib.as_deref())?;
    let detector = DetectorConfig { noise_half_width: a.noise, miss_probability: a.miss };
    let run = match harness::simulate(&scene, &a.task, &lib, &a.planner.planner(), &detector, a.seed) {
        Ok(run) => run,
        Err(why) => {
            writeln!(err, "not executable: {why}")?;
            return Ok(EXIT_TASK_FAILED);
        }
    };
    write!(err, "{}", run.plan.to_dsl())?;
    let log = run.simulator.event_log_jsonl();
    match &a.log {
        Some(p) => write_to(p, &log)?,
        None => out.write_all(log.as_bytes())?,
    }
    if run.outcome.task_success {
        writeln!(err, "success")?;
        Ok(EXIT_OK)
    } else {
        writeln!(err, "failed: {}", run.outcome.failure_reason.as_deref().unwrap_or("unknown"))?;
        Ok(EXIT_TASK_FAILED)
    }
}

fn suite(arg: &str) -> Result<TaskSuite> {
    match arg {
        "builtin:benchmark" => Ok(TaskSuite::benchmark()),
        "builtin:door_contrast" => Ok(TaskSuite::door_contrast()),
        a if a.starts_with("builtin:") => bail!("unknown builtin suite `{a}`"),
        path => Ok(TaskSuite::load(path)?),
    }
}

pub fn bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let format: ReportFormat = a.format.parse()?;
    let mut suite = suite(&a.tasks)?;
    if let Some(seed) = a.seed {
        suite = suite.with_seed(seed);
    }
    if let Some(noise) = a.noise {
        suite = suite.with_noise(noise);
    }
    let exp = run_experiment_with(&suite, a.trials, &a.planner.planner())?;
    let report = emit_report(&exp.report, format)?;
    match &a.out {
        Some(p) => {
            write_to(p, &report)?;
            writeln!(err, "wrote {} ({} trials)", p.display(), exp.records.len())?;
        }
        None => out.write_all(report.as_bytes())?,
    }
    if let Some(p) = &a.records {
        let mut lines = String::new();
        for r in &exp.records {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write_to(p, &lines)?;
    }
    Ok(EXIT_OK)
}

pub fn study(a: &StudyArgs, out: &mut dyn Write) -> Result<u8> {
    let detector = DetectorConfig { noise_half_width: a.noise, miss_probability: a.miss };
    let s = perception_discrepancy_study(&scene(&a.scene)?, &detector, a.seconds, a.seed)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
    Ok(EXIT_OK)
}

pub fn teach(a: &TeachArgs, out: &mut dyn Write) -> Result<u8> {
    let lib = build_scripted_library(&scene(&a.scene)?, library(Some(&a.dmp_lib))?)?;
    for s in lib.skills() {
        let motions: Vec<String> = s.motions.iter().map(|m| m.to_string()).collect();
        writeln!(out, "{} v{}: {}", s.name, s.version, motions.join(" "))?;
    }
    Ok(EXIT_OK)
}

pub fn serve(a: &ServeArgs, err: &mut dyn Write) -> Result<u8> {
    let config = SessionConfig {
        detector: DetectorConfig { noise_half_width: a.noise, miss_probability: a.miss },
        seed: a.seed,
        ..SessionConfig::default()
    };
    let session = Session::new(scene(&a.scene)?, library(a.dmp_lib.as_deref())?, a.planner.planner(), config);
    let state = AppState::new(
        session,
        ServerConfig { tick_interval: Duration::from_millis(a.tick_ms.max(1)), ..ServerConfig::default() },
    );
    writeln!(err, "listening on http://{}", a.addr)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(hrc_server::bind_and_serve(a.addr, state)).with_context(|| format!("serving on {}", a.addr))?;
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    match &cli.command {
        Cmd::Simulate(a) => simulate(a, out, err),
        Cmd::Bench(a) => bench(a, out, err),
        Cmd::Study(a) => study(a, out),
        Cmd::Teach(a) => teach(a, out),
        Cmd::Serve(a) => serve(a, err),
    }
}
