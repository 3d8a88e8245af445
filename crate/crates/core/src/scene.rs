//! Kitchen world state: objects with articulations, the camera, and the robot.
//!
//! Doors face the robot along −x. A door's handle sits at distance
//! `radius_door2axis` from its hinge; at opening angle θ it is at
//! `axis + (−r·sinθ)·x̂ + r·cosθ·û₀`, where `û₀` points from the hinge to the
//! closed handle (lateral for vertical hinges, upward for horizontal ones).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::perception::{make_label, sort_and_label, CameraIntrinsics, LateralAxis, RigidTransform};

type V = Vec3<f64>;

/// Widest footprint side of an object the gripper can pick up, when not stated.
pub const GRASPABLE_MAX_SIZE: f64 = 0.15;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("object `{0}`: {1}")]
    InvalidObject(String, &'static str),
    #[error("unknown builtin scene `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticulationKind {
    VerticalHinge,
    HorizontalHinge,
    /// Vertical hinge behind a push latch.
    PressPull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Articulation {
    pub kind: ArticulationKind,
    /// Hinge position relative to the object centre. For vertical hinges the z
    /// component is the handle height; for horizontal ones y is the handle's lateral
    /// position.
    pub axis_position: V,
    pub radius_door2axis: f64,
    pub open_angle: f64,
    #[serde(default)]
    pub latch_travel: f64,
    /// False when the door is gripped by its edge instead of a handle.
    #[serde(default = "yes")]
    pub has_handle: bool,
}

fn yes() -> bool {
    true
}

impl Articulation {
    pub fn is_vertical(&self) -> bool {
        matches!(self.kind, ArticulationKind::VerticalHinge | ArticulationKind::PressPull)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    #[serde(default)]
    pub door_angle: f64,
    #[serde(default)]
    pub latched: bool,
    #[serde(default)]
    pub powered: bool,
}

/// Interior volume, as an offset from the object centre and a size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub offset: V,
    pub size: V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    pub name: String,
    pub position: V,
    pub size: V,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub articulation: Option<Articulation>,
    #[serde(default)]
    pub state: ObjectState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<Cavity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knob: Option<V>,
    pub graspable: bool,
}

impl WorldObject {
    pub fn top(&self) -> f64 {
        self.position.z + 0.5 * self.size.z
    }

    pub fn bottom(&self) -> f64 {
        self.position.z - 0.5 * self.size.z
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.size.z
    }

    /// Whether `p` lies over this object's footprint (with `margin`).
    pub fn footprint_contains(&self, p: &V, margin: f64) -> bool {
        (p.x - self.position.x).abs() <= 0.5 * self.size.x + margin && (p.y - self.position.y).abs() <= 0.5 * self.size.y + margin
    }

    pub fn axis_world(&self) -> Option<V> {
        self.articulation.as_ref().map(|a| self.position + a.axis_position)
    }

    /// Unit vector from the hinge towards the closed handle.
    pub fn closed_direction(&self) -> Option<V> {
        let a = self.articulation.as_ref()?;
        Some(if a.is_vertical() {
            let s = if self.position.y - (self.position.y + a.axis_position.y) >= 0.0 { 1.0 } else { -1.0 };
            V::new(0.0, s, 0.0)
        } else {
            V::new(0.0, 0.0, 1.0)
        })
    }

    /// Handle (or grip point) location at opening angle `theta`.
    pub fn handle_at(&self, theta: f64) -> Option<V> {
        let a = self.articulation.as_ref()?;
        let axis = self.axis_world()?;
        let u0 = self.closed_direction()?;
        let r = a.radius_door2axis;
        Some(axis + V::new(-r * theta.sin(), 0.0, 0.0) + u0.scale(r * theta.cos()))
    }

    pub fn handle(&self) -> Option<V> {
        self.handle_at(self.state.door_angle)
    }

    pub fn knob_world(&self) -> Option<V> {
        self.knob.map(|k| self.position + k)
    }

    pub fn cavity_center(&self) -> Option<V> {
        self.cavity.map(|c| self.position + c.offset)
    }

    pub fn cavity_floor(&self) -> Option<f64> {
        self.cavity.map(|c| self.position.z + c.offset.z - 0.5 * c.size.z)
    }

    /// Whether `p` is inside the cavity box grown by `margin`.
    pub fn cavity_contains(&self, p: &V, margin: f64) -> bool {
        let Some(c) = self.cavity else { return false };
        let centre = self.position + c.offset;
        (p.x - centre.x).abs() <= 0.5 * c.size.x + margin
            && (p.y - centre.y).abs() <= 0.5 * c.size.y + margin
            && (p.z - centre.z).abs() <= 0.5 * c.size.z + margin
    }

    /// Door open enough to reach inside; always true without a door.
    pub fn interior_accessible(&self) -> bool {
        match &self.articulation {
            None => true,
            Some(a) => self.state.door_angle >= 0.5 * a.open_angle,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        let bad = |why| Err(SceneError::InvalidObject(self.id.clone(), why));
        if !(self.size.x > 0.0 && self.size.y > 0.0 && self.size.z > 0.0) {
            return bad("size must be positive");
        }
        if !self.position.is_finite() {
            return bad("position must be finite");
        }
        if let Some(a) = &self.articulation {
            if !(a.radius_door2axis > 0.0) {
                return bad("radius_door2axis must be positive");
            }
            if !(a.open_angle > 0.0 && a.open_angle <= std::f64::consts::PI) {
                return bad("open_angle must be in (0, pi]");
            }
            if !(0.0..=a.open_angle).contains(&self.state.door_angle) {
                return bad("door_angle outside articulation limits");
            }
            if a.kind == ArticulationKind::PressPull && !(a.latch_travel > 0.0) {
                return bad("press_pull needs a positive latch_travel");
            }
        }
        if let Some(c) = &self.cavity {
            if !(c.size.x > 0.0 && c.size.y > 0.0 && c.size.z > 0.0) {
                return bad("cavity size must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics<f64>,
    #[serde(rename = "extrinsics_T_c_w")]
    pub extrinsics: RigidTransform<f64>,
}

/// What the gripper is holding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Held {
    /// A free object, carried at `offset` from the end effector.
    Object { id: String, offset: V },
    /// The handle or edge of an articulated door.
    Handle { id: String },
}

impl Held {
    pub fn id(&self) -> &str {
        match self {
            Held::Object { id, .. } | Held::Handle { id } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// `(x, y, heading)` in metres and radians.
    pub base_pose: [f64; 3],
    pub ee_pos: V,
    pub ee_aperture: f64,
    #[serde(default)]
    pub held: Option<Held>,
    #[serde(default)]
    pub waist_angle: f64,
}

impl RobotState {
    pub fn base(&self) -> V {
        V::new(self.base_pose[0], self.base_pose[1], 0.0)
    }

    pub fn held_object(&self) -> Option<&str> {
        match &self.held {
            Some(Held::Object { id, .. }) => Some(id),
            _ => None,
        }
    }

    /// Point at base-relative `offset` (x forward, y left) in the world.
    pub fn base_relative(&self, offset: &V) -> V {
        let [bx, by, h] = self.base_pose;
        let (s, c) = h.sin_cos();
        V::new(bx + c * offset.x - s * offset.y, by + s * offset.x + c * offset.y, offset.z)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RobotSpec {
    #[serde(default)]
    base_pose: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObjectSpec {
    name: String,
    position: V,
    size: V,
    #[serde(default)]
    articulation: Option<Articulation>,
    #[serde(default)]
    state: Option<ObjectState>,
    #[serde(default)]
    cavity: Option<Cavity>,
    #[serde(default)]
    knob: Option<V>,
    #[serde(default)]
    graspable: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default)]
    lateral_axis: LateralAxis,
    camera: Camera,
    objects: Vec<ObjectSpec>,
    #[serde(default)]
    robot: Option<RobotSpec>,
    #[serde(default)]
    clearance_zone: Option<V>,
}

/// Ground-truth world. Object ids are the labels the objects get when their true
/// positions are sorted along the lateral axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub lateral_axis: LateralAxis,
    pub camera: Camera,
    pub objects: Vec<WorldObject>,
    pub robot: RobotState,
    /// Free spot on a surface where removed obstacles are put down.
    pub clearance_zone: Option<V>,
}

/// Base-relative home pose of the end effector.
pub const HOME_OFFSET: [f64; 3] = [0.35, 0.0, 1.0];

impl Scene {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        let labels =
            sort_and_label(&file.objects.iter().map(|o| (o.name.clone(), o.position)).collect::<Vec<_>>(), file.lateral_axis);
        let mut objects = Vec::with_capacity(file.objects.len());
        for spec in &file.objects {
            // first unused label of this class at this position
            let id = labels
                .iter()
                .find(|l| {
                    l.name == spec.name
                        && l.position_world == spec.position
                        && !objects.iter().any(|o: &WorldObject| o.id == l.label)
                })
                .map(|l| l.label.clone())
                .unwrap_or_else(|| make_label(&spec.name, 1));
            let graspable = spec.graspable.unwrap_or_else(|| {
                spec.articulation.is_none() && spec.cavity.is_none() && spec.size.x.max(spec.size.y) <= GRASPABLE_MAX_SIZE
            });
            let obj = WorldObject {
                id,
                name: spec.name.clone(),
                position: spec.position,
                size: spec.size,
                articulation: spec.articulation.clone(),
                state: spec.state.unwrap_or(ObjectState {
                    latched: matches!(spec.articulation.as_ref().map(|a| a.kind), Some(ArticulationKind::PressPull)),
                    ..ObjectState::default()
                }),
                cavity: spec.cavity,
                knob: spec.knob,
                graspable,
            };
            obj.validate()?;
            objects.push(obj);
        }
        let base_pose = file.robot.map(|r| r.base_pose).unwrap_or_default();
        let mut robot = RobotState { base_pose, ee_pos: V::zero(), ee_aperture: 1.0, held: None, waist_angle: 0.0 };
        robot.ee_pos = robot.base_relative(&V::from(HOME_OFFSET));
        Ok(Scene { lateral_axis: file.lateral_axis, camera: file.camera, objects, robot, clearance_zone: file.clearance_zone })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Loads `builtin:<name>` from the bundled scenes and anything else from disk.
    pub fn open(arg: &str) -> Result<Self, SceneError> {
        match arg.strip_prefix(builtin::PREFIX) {
            Some(name) => Self::from_json(builtin::by_name(name).ok_or_else(|| SceneError::UnknownBuiltin(name.to_string()))?),
            None => Self::load(arg),
        }
    }

    pub fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut WorldObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn objects_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a WorldObject> + 'a {
        self.objects.iter().filter(move |o| o.name == name)
    }

    /// First object of a class; the reference model for the class's geometry.
    pub fn class_model(&self, name: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Ee home position for the current base pose.
    pub fn home(&self) -> V {
        self.robot.base_relative(&V::from(HOME_OFFSET))
    }
}

/// Bundled scene files.
pub mod builtin {
    /// Prefix naming a bundled scene in place of a file path.
    pub const PREFIX: &str = "builtin:";
    pub const KITCHEN: &str = include_str!("../assets/scenes/kitchen.json");
    pub const CLEAN_TABLE: &str = include_str!("../assets/scenes/clean_table.json");
    pub const CUPS: &str = include_str!("../assets/scenes/cups.json");
    pub const CLUTTERED: &str = include_str!("../assets/scenes/cluttered.json");

    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "kitchen" => Some(KITCHEN),
            "clean_table" => Some(CLEAN_TABLE),
            "cups" => Some(CUPS),
            "cluttered" => Some(CLUTTERED),
            _ => None,
        }
    }
}
