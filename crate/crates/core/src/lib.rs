//! Language-planned kitchen manipulation with demonstration-learned movement primitives.
//!
//! The crate is organised bottom-up:
//!
//! * [`dmp`] learns and replays dynamic movement primitives,
//! * [`perception`] turns synthetic detections into labeled world-frame objects,
//! * [`planner`] compiles task text into motion-function plans,
//! * [`sim`] executes plans against an articulated kitchen scene,
//! * [`session`] runs the pause / demonstrate / commit / resume loop,
//! * [`harness`] scores repeated randomized trials.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix it to `f64` (or `f32`).

// `!(x > 0)` style guards are kept so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dmp;
pub mod geom;
pub mod harness;
pub mod library;
pub mod motion;
pub mod perception;
pub mod planner;
pub mod scalar;
pub mod scene;
pub mod session;
pub mod sim;

pub use scalar::Real;

pub type Dmp = dmp::DmpModel<f64>;
pub type DmpF32 = dmp::DmpModel<f32>;
pub type DmpConfig = dmp::DmpConfig<f64>;
pub type Trajectory = dmp::Trajectory<f64>;
pub type Vec3 = geom::Vec3<f64>;
pub type Mat3 = geom::Mat3<f64>;
pub type Intrinsics = perception::CameraIntrinsics<f64>;
pub type Transform = perception::RigidTransform<f64>;

pub use library::SkillLibrary;
pub use motion::{MotionFunction, MotionKind};
pub use scene::Scene;
