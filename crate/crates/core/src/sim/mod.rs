//! Kinematic execution of motion functions in a 2.5D kitchen: planar base, 3D
//! end-effector, hinged doors, latches, knobs and containers.

mod success;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use success::{check_success, predicates_for, Predicate, SuccessError, REST_TOLERANCE, SUCCESS_MARGIN};

use crate::geom::Vec3;
use crate::library::SkillLibrary;
use crate::motion::{gripper_aperture, MotionFunction, MotionKind};
use crate::planner::{Binding, Part, Plan, HOME_SYMBOL};
use crate::scene::{ArticulationKind, Held, RobotState, Scene, WorldObject};

type V = Vec3<f64>;

/// `_above` clearance over the support surface.
pub const ABOVE_OFFSET: f64 = 0.010;
/// Insertion depth below the cavity centre for `_inside`.
pub const INSIDE_DEPTH: f64 = 0.02;
/// Slack allowed between a held object's box and the cavity walls.
pub const CAVITY_FIT_MARGIN: f64 = 0.005;
/// A released object snaps onto a support whose top is at most this far above its bottom.
pub const SETTLE_TOLERANCE: f64 = 0.02;
/// A latched face can be pushed in this far past its rest position.
pub const PRESS_LIMIT: f64 = 0.02;

pub mod reason {
    pub const SKILL_MISS: &str = "skill-miss";
    pub const WRONG_ARTICULATION: &str = "wrong-articulation";
    pub const LATCHED: &str = "latched";
    pub const UNREACHABLE: &str = "unreachable";
    pub const UNREACHABLE_INTERIOR: &str = "unreachable-interior";
    pub const COLLISION: &str = "collision";
    pub const GRASP_MISSED: &str = "grasp-missed";
    pub const NOT_HOLDING_HANDLE: &str = "not-holding-handle";
    pub const UNBOUND_SYMBOL: &str = "unbound-symbol";
    pub const BAD_ARGUMENT: &str = "bad-argument";
    pub const DIVERGENCE: &str = "divergence";
    pub const NOT_ARTICULATED: &str = "not-articulated";
    pub const PREDICATE_UNMET: &str = "predicate-unmet";
    pub const UNKNOWN_PREDICATE: &str = "unknown-predicate";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ee_speed: f64,
    pub base_speed: f64,
    pub dt: f64,
    pub grasp_radius: f64,
    pub handle_tolerance: f64,
    pub knob_radius: f64,
    /// Planar reach of the end-effector from the base.
    pub reach_radius: f64,
    pub lift_range: [f64; 2],
    /// Distance the base keeps from a target it drives toward.
    pub base_standoff: f64,
    pub power_threshold_deg: f64,
    pub gripper_time: f64,
    pub waist_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ee_speed: 0.25,
            base_speed: 0.3,
            dt: 0.002,
            grasp_radius: 0.03,
            handle_tolerance: 0.02,
            knob_radius: 0.02,
            reach_radius: 1.1,
            lift_range: [0.0, 1.4],
            base_standoff: 1.0,
            power_threshold_deg: 30.0,
            gripper_time: 0.5,
            waist_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionResult {
    pub motion: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub executed: bool,
    pub per_motion_results: Vec<MotionResult>,
    pub task_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub subtasks_completed: usize,
}

/// One line of the event log, written when a motion ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub motion: String,
    pub robot: RobotState,
    pub changed_objects: Vec<WorldObject>,
}

/// Result of mirroring one demonstration sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mirrored {
    pub position: V,
    pub clamped: bool,
}

type Step<T> = Result<T, &'static str>;

fn class_of(label: &str) -> &str {
    label.trim_end_matches(|c: char| c.is_ascii_digit())
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Door angle implied by a point, measured like the door itself from the closed position.
fn door_theta(o: &WorldObject, p: &V) -> Option<f64> {
    let a = o.articulation.as_ref()?;
    let axis = o.axis_world()?;
    let d = *p - axis;
    Some(if a.is_vertical() {
        let u = o.closed_direction()?;
        (-d.x).atan2(d.y * u.y)
    } else {
        (-d.x).atan2(d.z)
    })
}

/// Distance from the hinge line and whether the point lies within the door's extent
/// along it.
fn door_radius_span(o: &WorldObject, p: &V) -> Option<(f64, bool)> {
    let a = o.articulation.as_ref()?;
    let axis = o.axis_world()?;
    let d = *p - axis;
    Some(if a.is_vertical() {
        (d.planar_norm(), (p.z - o.position.z).abs() <= 0.5 * o.size.z)
    } else {
        ((d.x * d.x + d.z * d.z).sqrt(), (p.y - o.position.y).abs() <= 0.5 * o.size.y)
    })
}

#[derive(Debug, Clone)]
pub struct Simulator {
    scene: Scene,
    config: SimConfig,
    t: f64,
    events: Vec<EventRecord>,
}

impl Simulator {
    pub fn new(scene: Scene, config: SimConfig) -> Self {
        Simulator { scene, config, t: 0.0, events: Vec::new() }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn into_scene(self) -> Scene {
        self.scene
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Event log as JSON lines.
    pub fn event_log_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }

    pub fn robot(&self) -> &RobotState {
        &self.scene.robot
    }

    fn in_reach(&self, p: &V) -> bool {
        let d = (*p - self.scene.robot.base()).planar_norm();
        let [lo, hi] = self.config.lift_range;
        d <= self.config.reach_radius + 1e-9 && p.z >= lo - 1e-9 && p.z <= hi + 1e-9
    }

    /// Nearest point of the reach envelope.
    pub fn clamp_to_reach(&self, p: &V) -> V {
        let base = self.scene.robot.base();
        let mut q = *p;
        let d = q - base;
        let r = d.planar_norm();
        if r > self.config.reach_radius {
            let s = self.config.reach_radius / r;
            q.x = base.x + d.x * s;
            q.y = base.y + d.y * s;
        }
        q.z = q.z.clamp(self.config.lift_range[0], self.config.lift_range[1]);
        q
    }

    fn held_half_height(&self) -> f64 {
        self.scene.robot.held_object().and_then(|id| self.scene.object(id)).map_or(0.0, |o| o.half_height())
    }

    fn held_offset(&self) -> V {
        match &self.scene.robot.held {
            Some(Held::Object { offset, .. }) => *offset,
            _ => V::zero(),
        }
    }

    /// True object of the binding's class nearest to the perceived reference.
    fn true_object(&self, b: &Binding) -> Option<&WorldObject> {
        let class = class_of(b.label.as_deref()?);
        self.scene
            .objects
            .iter()
            .filter(|o| o.name == class)
            .min_by(|a, c| (a.position - b.position).norm().total_cmp(&(c.position - b.position).norm()))
    }

    /// Geometric point a binding designates, without gripper-dependent offsets.
    pub fn anchor_point(&self, b: &Binding) -> Step<V> {
        if b.part == Part::Center || b.part == Part::Clearance {
            return Ok(b.position);
        }
        let o = self.true_object(b).ok_or(reason::UNBOUND_SYMBOL)?;
        let local = |p: Option<V>| p.map(|p| b.position + (p - o.position)).ok_or(reason::UNBOUND_SYMBOL);
        match b.part {
            Part::Surface | Part::Above => Ok(b.position + V::new(0.0, 0.0, o.half_height())),
            Part::Handle | Part::Grip => local(o.handle()),
            Part::Knob => local(o.knob_world()),
            Part::Inside => local(o.cavity_center()),
            Part::Center | Part::Clearance => unreachable!(),
        }
    }

    /// End-effector target for a `move_to_position` binding.
    pub fn resolve_target(&self, b: &Binding) -> Step<V> {
        let held = self.held_half_height();
        match b.part {
            Part::Center | Part::Handle | Part::Grip | Part::Knob => self.anchor_point(b),
            Part::Clearance => Ok(b.position + V::new(0.0, 0.0, held)),
            Part::Surface => Ok(self.anchor_point(b)? + V::new(0.0, 0.0, held)),
            Part::Above => Ok(self.anchor_point(b)? + V::new(0.0, 0.0, ABOVE_OFFSET + held)),
            Part::Inside => {
                let o = self.true_object(b).ok_or(reason::UNBOUND_SYMBOL)?;
                if !o.interior_accessible() {
                    return Err(reason::UNREACHABLE_INTERIOR);
                }
                let centre = self.anchor_point(b)?;
                let floor = b.position.z + (o.cavity_floor().ok_or(reason::UNBOUND_SYMBOL)? - o.position.z);
                let target = V::new(centre.x, centre.y, (centre.z - INSIDE_DEPTH).max(floor + held));
                if let Some(id) = self.scene.robot.held_object() {
                    let h = self.scene.object(id).ok_or(reason::COLLISION)?;
                    let c = target + self.held_offset();
                    let cav = o.cavity.ok_or(reason::UNBOUND_SYMBOL)?;
                    let cc = o.position + cav.offset;
                    let fits = (0..3).all(|k| (c[k] - cc[k]).abs() + 0.5 * h.size[k] <= 0.5 * cav.size[k] + CAVITY_FIT_MARGIN);
                    if !fits {
                        return Err(reason::COLLISION);
                    }
                }
                Ok(target)
            }
        }
    }

    fn release_handle(&mut self) {
        if matches!(self.scene.robot.held, Some(Held::Handle { .. })) {
            self.scene.robot.held = None;
        }
    }

    /// Moves the end-effector to `p` in one step and lets the world respond.
    fn ee_step(&mut self, p: V) {
        let prev = self.scene.robot.ee_pos;
        let mut p = p;
        for o in self.scene.objects.iter_mut() {
            let Some(a) = o.articulation.as_ref() else { continue };
            if a.kind != ArticulationKind::PressPull || o.state.door_angle > 0.0 {
                continue;
            }
            let axis = o.axis_world().expect("articulated");
            let handle = o.handle_at(0.0).expect("articulated");
            let (lo, hi) = (axis.y.min(handle.y) - 0.01, axis.y.max(handle.y) + 0.01);
            let face = (p.y >= lo && p.y <= hi) && (p.z - o.position.z).abs() <= 0.5 * o.size.z;
            if face && p.x > axis.x {
                if p.x - axis.x > a.latch_travel {
                    o.state.latched = false;
                }
                p.x = p.x.min(axis.x + PRESS_LIMIT);
            }
        }
        self.scene.robot.ee_pos = p;
        let held_handle = match self.scene.robot.held.clone() {
            Some(Held::Object { id, offset }) => {
                if let Some(o) = self.scene.object_mut(&id) {
                    o.position = p + offset;
                }
                None
            }
            Some(Held::Handle { id }) => Some(id),
            None => None,
        };
        if let Some(id) = &held_handle {
            let tol = self.config.handle_tolerance;
            let o = self.scene.object_mut(id).expect("held handle exists");
            let a = o.articulation.clone().expect("handle on articulated object");
            let theta = door_theta(o, &p).unwrap_or(0.0).clamp(0.0, a.open_angle);
            let target = if o.state.latched { 0.0 } else { theta };
            let dev = (p - o.handle_at(target).expect("articulated")).norm();
            if dev > tol {
                self.release_handle();
            } else {
                o.state.door_angle = target;
            }
        }
        for o in self.scene.objects.iter_mut() {
            if held_handle.as_deref() == Some(o.id.as_str()) {
                continue;
            }
            let Some(a) = o.articulation.clone() else { continue };
            let d = o.state.door_angle;
            if d <= 0.0 {
                continue;
            }
            let (Some(tp), Some(tn), Some((r, span))) = (door_theta(o, &prev), door_theta(o, &p), door_radius_span(o, &p)) else {
                continue;
            };
            if tp >= d && tn < d && span && r >= 0.01 && r <= a.radius_door2axis + 0.01 {
                o.state.door_angle = tn.max(0.0);
                if o.state.door_angle == 0.0 && a.kind == ArticulationKind::PressPull {
                    o.state.latched = true;
                }
            }
        }
    }

    fn advance(&mut self) {
        self.t += self.config.dt;
    }

    fn move_linear(&mut self, target: V) -> Step<()> {
        if !self.in_reach(&target) {
            return Err(reason::UNREACHABLE);
        }
        let start = self.scene.robot.ee_pos;
        let dist = (target - start).norm();
        let n = (dist / (self.config.ee_speed * self.config.dt)).ceil() as usize;
        for k in 1..=n {
            let s = k as f64 / n as f64;
            self.ee_step(start + (target - start).scale(s));
            self.advance();
        }
        Ok(())
    }

    /// Drives the base straight toward `target` until it is `base_standoff` away.
    fn drive_base_toward(&mut self, target: &V) -> Step<()> {
        if matches!(self.scene.robot.held, Some(Held::Handle { .. })) {
            return Err(reason::UNREACHABLE);
        }
        let base = self.scene.robot.base();
        let d = V::new(target.x - base.x, target.y - base.y, 0.0);
        let dist = d.planar_norm();
        let travel = dist - self.config.base_standoff;
        if travel <= 0.0 {
            return Ok(());
        }
        let dir = d.scale(1.0 / dist);
        let n = (travel / (self.config.base_speed * self.config.dt)).ceil() as usize;
        let step = dir.scale(travel / n as f64);
        for _ in 0..n {
            self.scene.robot.base_pose[0] += step.x;
            self.scene.robot.base_pose[1] += step.y;
            let ee = self.scene.robot.ee_pos + step;
            self.ee_step(ee);
            self.advance();
        }
        self.scene.robot.base_pose[2] = dir.y.atan2(dir.x);
        Ok(())
    }

    fn move_to(&mut self, target: V) -> Step<()> {
        if (target - self.scene.robot.base()).planar_norm() > self.config.reach_radius {
            self.drive_base_toward(&target)?;
        }
        self.move_linear(target)
    }

    fn grasp(&mut self) -> Step<()> {
        if self.scene.robot.held.is_some() {
            return Ok(());
        }
        let ee = self.scene.robot.ee_pos;
        let r = self.config.grasp_radius;
        let object = self
            .scene
            .objects
            .iter()
            .filter(|o| o.graspable)
            .map(|o| ((o.position - ee).norm(), o))
            .filter(|(d, _)| *d <= r)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, o)| Held::Object { id: o.id.clone(), offset: o.position - ee });
        let handle = || {
            self.scene
                .objects
                .iter()
                .filter_map(|o| o.handle().map(|h| ((h - ee).norm(), o)))
                .filter(|(d, _)| *d <= r)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, o)| Held::Handle { id: o.id.clone() })
        };
        match object.or_else(handle) {
            Some(h) => {
                self.scene.robot.held = Some(h);
                Ok(())
            }
            None => Err(reason::GRASP_MISSED),
        }
    }

    fn release(&mut self) {
        let Some(held) = self.scene.robot.held.take() else { return };
        let Held::Object { id, .. } = held else { return };
        let Some(obj) = self.scene.object(&id).cloned() else { return };
        let p = obj.position;
        let in_cavity = self.scene.objects.iter().any(|o| o.id != id && o.cavity_contains(&p, CAVITY_FIT_MARGIN));
        if in_cavity {
            return;
        }
        let bottom = obj.bottom();
        let support = self
            .scene
            .objects
            .iter()
            .filter(|o| o.id != id && o.footprint_contains(&p, 0.0) && o.top() <= bottom + SETTLE_TOLERANCE)
            .map(|o| o.top())
            .fold(0.0_f64, f64::max);
        if let Some(o) = self.scene.object_mut(&id) {
            o.position.z = support + obj.half_height();
        }
    }

    fn set_aperture(&mut self, aperture: f64) -> Step<()> {
        let was = self.scene.robot.ee_aperture;
        self.scene.robot.ee_aperture = aperture.clamp(0.0, 1.0);
        if aperture < 0.5 && (was >= 0.5 || self.scene.robot.held.is_none()) {
            self.grasp()
        } else {
            if aperture >= 0.5 {
                self.release();
            }
            Ok(())
        }
    }

    fn base_cycle_move(&mut self) -> Step<()> {
        let Some(Held::Handle { id }) = self.scene.robot.held.clone() else {
            return Err(reason::NOT_HOLDING_HANDLE);
        };
        let o = self.scene.object(&id).cloned().ok_or(reason::NOT_HOLDING_HANDLE)?;
        let a = o.articulation.clone().ok_or(reason::NOT_ARTICULATED)?;
        if a.kind == ArticulationKind::HorizontalHinge {
            self.release_handle();
            return Err(reason::WRONG_ARTICULATION);
        }
        if o.state.latched {
            self.release_handle();
            return Err(reason::LATCHED);
        }
        let axis = o.axis_world().ok_or(reason::NOT_ARTICULATED)?;
        let start = o.state.door_angle;
        let sweep = a.open_angle - start;
        let arc = sweep.abs() * a.radius_door2axis;
        let n = ((arc / (self.config.base_speed * self.config.dt)).ceil() as usize).max(1);
        self.scene.robot.ee_pos = o.handle().expect("articulated");
        for k in 1..=n {
            let theta = start + sweep * k as f64 / n as f64;
            let prev_h = self.scene.robot.ee_pos;
            let h = o.handle_at(theta).expect("articulated");
            let phi = wrap((h.y - axis.y).atan2(h.x - axis.x) - (prev_h.y - axis.y).atan2(prev_h.x - axis.x));
            let (s, c) = phi.sin_cos();
            let r = &mut self.scene.robot;
            let (bx, by) = (r.base_pose[0] - axis.x, r.base_pose[1] - axis.y);
            r.base_pose = [axis.x + c * bx - s * by, axis.y + s * bx + c * by, wrap(r.base_pose[2] + phi)];
            r.ee_pos = h;
            if let Some(door) = self.scene.object_mut(&id) {
                door.state.door_angle = theta;
            }
            self.advance();
        }
        Ok(())
    }

    fn close_move(&mut self, b: &Binding) -> Step<()> {
        let id = self.true_object(b).map(|o| o.id.clone()).ok_or(reason::UNBOUND_SYMBOL)?;
        let o = self.scene.object(&id).cloned().expect("found above");
        let a = o.articulation.clone().ok_or(reason::NOT_ARTICULATED)?;
        if a.kind == ArticulationKind::HorizontalHinge {
            return Err(reason::WRONG_ARTICULATION);
        }
        if o.state.door_angle <= 0.0 {
            return Ok(());
        }
        let offset = b.position - o.position;
        self.move_to(o.handle().expect("articulated") + offset)?;
        let start = o.state.door_angle;
        let arc = start * a.radius_door2axis;
        let n = ((arc / (self.config.ee_speed * self.config.dt)).ceil() as usize).max(1);
        for k in 1..=n {
            let theta = start * (1.0 - k as f64 / n as f64);
            let h = o.handle_at(theta).expect("articulated");
            self.scene.robot.ee_pos = h + offset;
            if let Some(door) = self.scene.object_mut(&id) {
                door.state.door_angle = theta;
                if theta == 0.0 && a.kind == ArticulationKind::PressPull {
                    door.state.latched = true;
                }
            }
            self.advance();
        }
        Ok(())
    }

    fn rotate_waist(&mut self, degrees: f64) {
        let rad = degrees.to_radians();
        self.scene.robot.waist_angle = wrap(self.scene.robot.waist_angle + rad);
        self.t += rad.abs() / self.config.waist_speed;
        if degrees.abs() < self.config.power_threshold_deg {
            return;
        }
        let ee = self.scene.robot.ee_pos;
        let r = self.config.knob_radius;
        if let Some(o) = self.scene.objects.iter_mut().find(|o| o.knob_world().is_some_and(|k| (k - ee).norm() <= r)) {
            o.state.powered = !o.state.powered;
        }
    }

    fn dmp_publish(&mut self, name: &str, bindings: &BTreeMap<String, Binding>, library: &SkillLibrary) -> Step<()> {
        let model = library.dmp(name).ok_or(reason::SKILL_MISS)?;
        if model.dims() != 4 {
            return Err(reason::BAD_ARGUMENT);
        }
        let shift = match library.owner_of(name).and_then(|r| r.anchor.as_ref()) {
            Some(anchor) => {
                let b = bindings.get(&anchor.symbol).ok_or(reason::UNBOUND_SYMBOL)?;
                self.anchor_point(b)? - anchor.position
            }
            None => V::zero(),
        };
        let r = &self.scene.robot;
        let y0 = [r.ee_pos.x, r.ee_pos.y, r.ee_pos.z, r.ee_aperture];
        let g = [model.g_demo[0] + shift.x, model.g_demo[1] + shift.y, model.g_demo[2] + shift.z, model.g_demo[3]];
        let traj = model.rollout(&y0, &g, model.config.tau, self.config.dt).map_err(|_| reason::DIVERGENCE)?;
        for s in traj.samples().iter().skip(1) {
            let p = V::new(s.y[0], s.y[1], s.y[2]);
            if !self.in_reach(&p) {
                return Err(reason::UNREACHABLE);
            }
            self.ee_step(p);
            let was = self.scene.robot.ee_aperture;
            let a = s.y[3].clamp(0.0, 1.0);
            self.scene.robot.ee_aperture = a;
            if was >= 0.5 && a < 0.5 {
                let _ = self.grasp();
            } else if was < 0.5 && a >= 0.5 {
                self.release();
            }
            self.advance();
        }
        if self.scene.robot.ee_aperture < 0.5 && self.scene.robot.held.is_none() {
            return self.grasp();
        }
        Ok(())
    }

    fn dispatch(&mut self, m: &MotionFunction, bindings: &BTreeMap<String, Binding>, library: &SkillLibrary) -> Step<()> {
        let bound = || bindings.get(&m.arg).ok_or(reason::UNBOUND_SYMBOL);
        match m.kind {
            MotionKind::MoveToPosition => {
                let target = if m.arg == HOME_SYMBOL { self.scene.home() } else { self.resolve_target(bound()?)? };
                self.move_to(target)
            }
            MotionKind::GripperControl => {
                let a = gripper_aperture(&m.arg).ok_or(reason::BAD_ARGUMENT)?;
                self.t += self.config.gripper_time;
                self.set_aperture(a)
            }
            MotionKind::BaseCycleMove => self.base_cycle_move(),
            MotionKind::CloseMove => self.close_move(bound()?),
            MotionKind::RotateWaist => {
                let deg: f64 = m.arg.parse().map_err(|_| reason::BAD_ARGUMENT)?;
                self.rotate_waist(deg);
                Ok(())
            }
            MotionKind::DmpPublish => self.dmp_publish(&m.arg, bindings, library),
        }
    }

    /// Executes one motion to completion and appends its event record.
    pub fn execute_motion(
        &mut self,
        m: &MotionFunction,
        bindings: &BTreeMap<String, Binding>,
        library: &SkillLibrary,
    ) -> MotionResult {
        let before = self.scene.objects.clone();
        let r = self.dispatch(m, bindings, library);
        let changed = self.scene.objects.iter().zip(&before).filter(|(a, b)| a != b).map(|(a, _)| a.clone()).collect();
        self.events.push(EventRecord {
            t: self.t,
            motion: m.to_string(),
            robot: self.scene.robot.clone(),
            changed_objects: changed,
        });
        MotionResult { motion: m.to_string(), ok: r.is_ok(), reason: r.err().map(str::to_string) }
    }

    /// Runs sub-tasks in order, stopping at the first failed motion.
    pub fn run_plan(&mut self, plan: &Plan, library: &SkillLibrary) -> ExecutionOutcome {
        let before = self.scene.clone();
        let mut results = Vec::new();
        let mut failure = None;
        let mut completed = 0;
        'outer: for st in &plan.subtasks {
            for m in &st.motions {
                let r = self.execute_motion(m, &plan.bound_symbols, library);
                let ok = r.ok;
                if !ok {
                    failure = Some(format!("{}: {}: {}", st.description, r.motion, r.reason.clone().unwrap_or_default()));
                }
                results.push(r);
                if !ok {
                    break 'outer;
                }
            }
            completed += 1;
        }
        let executed = failure.is_none();
        let mut task_success = false;
        if executed {
            match check_success(&plan.task_text, &before, &self.scene) {
                Ok(true) => task_success = true,
                Ok(false) => failure = Some(reason::PREDICATE_UNMET.to_string()),
                Err(e) => failure = Some(format!("{}: {e}", reason::UNKNOWN_PREDICATE)),
            }
        }
        ExecutionOutcome {
            executed,
            per_motion_results: results,
            task_success,
            failure_reason: failure,
            subtasks_completed: completed,
        }
    }

    /// Follows one demonstration sample: the end-effector moves there in small steps
    /// (clamped to the reach envelope) and the gripper follows the aperture.
    pub fn mirror_sample(&mut self, p: V, aperture: f64) -> Mirrored {
        let q = self.clamp_to_reach(&p);
        let clamped = (q - p).norm() > 1e-12;
        let start = self.scene.robot.ee_pos;
        let max_step = self.config.ee_speed * self.config.dt;
        let n = ((q - start).norm() / max_step).ceil().max(1.0) as usize;
        for k in 1..=n {
            self.ee_step(start + (q - start).scale(k as f64 / n as f64));
        }
        let was = self.scene.robot.ee_aperture;
        let a = aperture.clamp(0.0, 1.0);
        self.scene.robot.ee_aperture = a;
        if a < 0.5 && was >= 0.5 {
            let _ = self.grasp();
        } else if a >= 0.5 && was < 0.5 {
            self.release();
        }
        Mirrored { position: self.scene.robot.ee_pos, clamped }
    }

    /// Appends a free-form event (used for demonstrations).
    pub fn log_event(&mut self, motion: &str, before: &[WorldObject]) {
        let changed = self.scene.objects.iter().zip(before).filter(|(a, b)| a != b).map(|(a, _)| a.clone()).collect();
        self.events.push(EventRecord {
            t: self.t,
            motion: motion.to_string(),
            robot: self.scene.robot.clone(),
            changed_objects: changed,
        });
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }
}

/// Executes a plan on a fresh simulator.
pub fn run_plan(plan: &Plan, scene: &Scene, library: &SkillLibrary, config: &SimConfig) -> (ExecutionOutcome, Simulator) {
    let mut sim = Simulator::new(scene.clone(), config.clone());
    let out = sim.run_plan(plan, library);
    (out, sim)
}
