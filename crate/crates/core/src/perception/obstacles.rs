//! Objects lying in the approach corridor between the robot and a target.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LabeledObject;
use crate::geom::Vec3;
use crate::scalar::Real;

pub const BOUNDARY_TOLERANCE: f64 = 1e-9;
pub const MIN_APPROACH: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ObstacleError {
    #[error("target coincides with the robot base in the ground plane")]
    DegenerateGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "obstacles", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum ObstacleReport<T> {
    /// The workspace held no objects at all.
    NoObjects,
    /// Obstacles nearest the robot first; may be empty.
    Found(Vec<LabeledObject<T>>),
}

impl<T> ObstacleReport<T> {
    pub fn obstacles(&self) -> &[LabeledObject<T>] {
        match self {
            ObstacleReport::NoObjects => &[],
            ObstacleReport::Found(v) => v,
        }
    }

    pub fn is_clear(&self) -> bool {
        self.obstacles().is_empty()
    }
}

/// `No objects`, or the obstacle labels separated by commas.
impl<T> fmt::Display for ObstacleReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObstacleReport::NoObjects => f.write_str("No objects"),
            ObstacleReport::Found(v) => {
                let labels: Vec<&str> = v.iter().map(|o| o.label.as_str()).collect();
                f.write_str(&labels.join(", "))
            }
        }
    }
}

/// Equilateral detection triangle in the ground plane: apex at the robot base, the
/// midpoint of the opposite side at the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionTriangle<T> {
    apex: (T, T),
    dir: (T, T),
    height: T,
}

impl<T: Real> DetectionTriangle<T> {
    pub fn new(robot_base: &Vec3<T>, target: &Vec3<T>) -> Result<Self, ObstacleError> {
        let (dx, dy) = (target.x - robot_base.x, target.y - robot_base.y);
        let height = (dx * dx + dy * dy).sqrt();
        if !(height > T::lit(MIN_APPROACH)) {
            return Err(ObstacleError::DegenerateGeometry);
        }
        Ok(DetectionTriangle { apex: (robot_base.x, robot_base.y), dir: (dx / height, dy / height), height })
    }

    pub fn height(&self) -> T {
        self.height
    }

    pub fn side(&self) -> T {
        T::lit(2.0) * self.height / T::lit(3.0).sqrt()
    }

    pub fn vertices(&self) -> [(T, T); 3] {
        let half = self.height / T::lit(3.0).sqrt();
        let (ux, uy) = self.dir;
        let (mx, my) = (self.apex.0 + ux * self.height, self.apex.1 + uy * self.height);
        [self.apex, (mx - uy * half, my + ux * half), (mx + uy * half, my - ux * half)]
    }

    /// Ground-plane membership; points within the boundary tolerance count as inside.
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        let (px, py) = (p.x - self.apex.0, p.y - self.apex.1);
        let along = px * self.dir.0 + py * self.dir.1;
        let lateral = (-px * self.dir.1 + py * self.dir.0).abs();
        let tol = T::lit(BOUNDARY_TOLERANCE);
        let half = T::lit(0.5);
        let cos30 = T::lit(3.0).sqrt() * half;
        self.height - along >= -tol && along * half - lateral * cos30 >= -tol
    }
}

/// Workspace objects inside the triangle, excluding any labelled in `exclude` and
/// anything sitting exactly on the target.
pub fn identify_obstacles<T: Real>(
    target: &Vec3<T>,
    robot_base: &Vec3<T>,
    workspace: &[LabeledObject<T>],
    exclude: &[&str],
) -> Result<ObstacleReport<T>, ObstacleError> {
    let tri = DetectionTriangle::new(robot_base, target)?;
    if workspace.is_empty() {
        return Ok(ObstacleReport::NoObjects);
    }
    let on_target = |p: &Vec3<T>| {
        (p.x - target.x).abs() <= T::lit(BOUNDARY_TOLERANCE) && (p.y - target.y).abs() <= T::lit(BOUNDARY_TOLERANCE)
    };
    let mut found: Vec<LabeledObject<T>> = workspace
        .iter()
        .filter(|o| !exclude.contains(&o.label.as_str()) && !on_target(&o.position_world) && tri.contains(&o.position_world))
        .cloned()
        .collect();
    let dist = |o: &LabeledObject<T>| {
        let d = o.position_world - *robot_base;
        d.planar_norm()
    };
    found.sort_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.label.cmp(&b.label)));
    Ok(ObstacleReport::Found(found))
}
