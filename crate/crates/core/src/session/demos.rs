//! Scripted teleoperation streams for the door skills, and a library builder that
//! teaches them through a [`Session`] exactly as a user at the console would.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use super::{Command, DemoSample, Phase, Session, SessionError};
use crate::geom::Vec3;
use crate::library::{SkillLibrary, SkillRecord};
use crate::scene::{ArticulationKind, Scene, WorldObject};
use crate::sim::PRESS_LIMIT;

pub const DEMO_RATE_HZ: f64 = 50.0;
/// Fraction of the opening limit the scripted pulls stop at.
pub const PULL_FRACTION: f64 = 0.955;

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Builds a sample stream leg by leg, each leg following a minimum-jerk profile.
#[derive(Debug, Clone)]
pub struct DemoScript {
    samples: Vec<DemoSample>,
    pos: Vec3<f64>,
    aperture: f64,
    t: f64,
    hz: f64,
}

impl DemoScript {
    pub fn new(start: Vec3<f64>, aperture: f64) -> Self {
        let first = DemoSample { t: 0.0, x: start.x, y: start.y, z: start.z, aperture };
        DemoScript { samples: vec![first], pos: start, aperture, t: 0.0, hz: DEMO_RATE_HZ }
    }

    fn leg(mut self, duration: f64, path: impl Fn(f64) -> (Vec3<f64>, f64)) -> Self {
        let n = (duration * self.hz).ceil().max(1.0) as usize;
        for k in 1..=n {
            let (p, a) = path(min_jerk(k as f64 / n as f64));
            self.t += duration / n as f64;
            self.samples.push(DemoSample { t: self.t, x: p.x, y: p.y, z: p.z, aperture: a });
            self.pos = p;
            self.aperture = a;
        }
        self
    }

    pub fn move_to(self, target: Vec3<f64>, duration: f64) -> Self {
        let (from, a) = (self.pos, self.aperture);
        self.leg(duration, move |s| (from + (target - from).scale(s), a))
    }

    pub fn gripper(self, aperture: f64, duration: f64) -> Self {
        let (p, from) = (self.pos, self.aperture);
        self.leg(duration, move |s| (p, from + (aperture - from) * s))
    }

    /// Follows `curve` as its parameter goes from `from` to `to`.
    pub fn sweep(self, curve: impl Fn(f64) -> Vec3<f64>, from: f64, to: f64, duration: f64) -> Self {
        let a = self.aperture;
        self.leg(duration, move |s| (curve(from + (to - from) * s), a))
    }

    pub fn hold(self, duration: f64) -> Self {
        let (p, a) = (self.pos, self.aperture);
        self.leg(duration, move |_| (p, a))
    }

    pub fn position(&self) -> Vec3<f64> {
        self.pos
    }

    pub fn samples(self) -> Vec<DemoSample> {
        self.samples
    }
}

fn travel_time(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    ((b - a).norm() / 0.2).max(0.6)
}

/// Approach, grasp and pull a hinged door open, then let go and return to `start`.
/// Press-pull doors are pushed past their latch first.
pub fn open_door(door: &WorldObject, start: Vec3<f64>) -> Option<Vec<DemoSample>> {
    let art = door.articulation.as_ref()?;
    let grip = door.handle_at(0.0)?;
    let mut script = DemoScript::new(start, 1.0).move_to(grip, travel_time(start, grip));
    if art.kind == ArticulationKind::PressPull {
        // Halfway between releasing the latch and the end stop.
        let depth = 0.5 * (art.latch_travel + PRESS_LIMIT);
        let pressed = grip + Vec3::new(depth, 0.0, 0.0);
        script = script.move_to(pressed, 0.6).move_to(grip, 0.6);
    }
    let end = PULL_FRACTION * art.open_angle;
    let released = door.handle_at(end)?;
    let retreat = released + Vec3::new(-0.075, 0.0, 0.0);
    let d = door.clone();
    let samples = script
        .gripper(0.0, 0.5)
        .hold(0.6)
        .sweep(move |th| d.handle_at(th).expect("articulated"), 0.0, end, 3.0)
        .gripper(1.0, 0.5)
        .move_to(retreat, 0.6)
        .move_to(start, travel_time(retreat, start))
        .samples();
    Some(samples)
}

/// Sweeps an open horizontal-hinge door shut from underneath with an open hand.
pub fn close_door(door: &WorldObject, start: Vec3<f64>) -> Option<Vec<DemoSample>> {
    let art = door.articulation.as_ref()?;
    if art.is_vertical() {
        return None;
    }
    let axis = door.axis_world()?;
    let r = 0.8 * art.radius_door2axis;
    let below = (door.state.door_angle + 0.25).min(FRAC_PI_2 + 0.25);
    let curve = move |th: f64| axis + Vec3::new(-r * th.sin(), 0.0, r * th.cos());
    let entry = axis + Vec3::new(-1.5 * art.radius_door2axis, 0.0, -0.06);
    let first = curve(below);
    let last = curve(0.0);
    let retreat = last + Vec3::new(-0.15, 0.0, 0.08);
    let samples = DemoScript::new(start, 1.0)
        .move_to(entry, travel_time(start, entry))
        .move_to(first, 0.8)
        .sweep(curve, below, 0.0, 2.5)
        .move_to(retreat, 0.8)
        .samples();
    Some(samples)
}

#[derive(Debug, Error)]
pub enum TeachError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("teaching `{task}` stopped in phase {phase}: {detail}")]
    Unexpected { task: String, phase: Phase, detail: String },
    #[error("scene has no articulated `{0}`")]
    NoDoor(String),
}

/// Runs the full loop for one task: submit, pause, stream the demonstration, commit
/// under the proposed name, resume and finish. Returns the stored skill.
pub fn teach(
    session: &mut Session,
    task: &str,
    script: impl FnOnce(&Scene, Vec3<f64>) -> Option<Vec<DemoSample>>,
) -> Result<SkillRecord, TeachError> {
    let unexpected = |s: &Session, detail: &str| TeachError::Unexpected {
        task: task.to_string(),
        phase: s.phase(),
        detail: detail.to_string(),
    };
    session.handle(Command::Submit { text: task.to_string() })?;
    if session.phase() != Phase::Executing {
        return Err(unexpected(session, "plan did not start"));
    }
    session.handle(Command::Pause)?;
    let samples = script(session.scene(), session.scene().robot.ee_pos).ok_or_else(|| TeachError::NoDoor(task.to_string()))?;
    session.handle(Command::StartDemo)?;
    for s in samples {
        session.handle(Command::Sample(s))?;
    }
    session.handle(Command::FinishDemo)?;
    let id = session.recording().map(|r| r.id.clone()).ok_or_else(|| unexpected(session, "no recording"))?;
    session.handle(Command::Commit { recording_id: id, name: None, replace: false })?;
    let record = session.library().skills().find(|r| Some(&r.created_from) == session.recording().map(|r| &r.id)).cloned();
    let record = record.ok_or_else(|| unexpected(session, "skill not stored"))?;
    session.handle(Command::Resume)?;
    session.run();
    match session.last_status() {
        Some(st) if st.success => Ok(record),
        Some(st) => Err(unexpected(session, st.failure_reason.as_deref().unwrap_or("task failed"))),
        None => Err(unexpected(session, "no outcome")),
    }
}

fn door<'a>(scene: &'a Scene, name: &str) -> Option<&'a WorldObject> {
    scene.objects.iter().find(|o| o.name == name && o.articulation.is_some())
}

/// Teaches opening and closing the oven and opening the cabinet in `scene`, storing
/// the skills in `library`.
pub fn build_scripted_library(scene: &Scene, library: SkillLibrary) -> Result<SkillLibrary, TeachError> {
    let mut session = Session::with_defaults(scene.clone(), library);
    teach(&mut session, "Open the oven", |s, start| open_door(door(s, "oven")?, start))?;
    teach(&mut session, "Close the oven", |s, start| close_door(door(s, "oven")?, start))?;
    session.handle(Command::Reset)?;
    teach(&mut session, "Open the cabinet", |s, start| open_door(door(s, "cabinet")?, start))?;
    Ok(session.library().clone())
}
