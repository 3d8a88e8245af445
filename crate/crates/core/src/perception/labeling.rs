//! Grouping detections by class and numbering them along the scene's lateral axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::scalar::Real;

/// Signed world axis along which "left to right" increases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LateralAxis {
    PosX,
    NegX,
    #[default]
    PosY,
    NegY,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("lateral axis must be one of +x, -x, +y, -y (got `{0}`)")]
pub struct LateralAxisError(String);

impl LateralAxis {
    pub fn coordinate<T: Real>(self, p: &Vec3<T>) -> T {
        match self {
            LateralAxis::PosX => p.x,
            LateralAxis::NegX => -p.x,
            LateralAxis::PosY => p.y,
            LateralAxis::NegY => -p.y,
        }
    }
}

impl FromStr for LateralAxis {
    type Err = LateralAxisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+x" | "x" => Ok(LateralAxis::PosX),
            "-x" => Ok(LateralAxis::NegX),
            "+y" | "y" => Ok(LateralAxis::PosY),
            "-y" => Ok(LateralAxis::NegY),
            other => Err(LateralAxisError(other.to_string())),
        }
    }
}

impl fmt::Display for LateralAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LateralAxis::PosX => "+x",
            LateralAxis::NegX => "-x",
            LateralAxis::PosY => "+y",
            LateralAxis::NegY => "-y",
        })
    }
}

impl TryFrom<String> for LateralAxis {
    type Error = LateralAxisError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LateralAxis> for String {
    fn from(a: LateralAxis) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct LabeledObject<T> {
    /// `<name><k>`, e.g. `cup2`.
    pub label: String,
    pub name: String,
    pub position_world: Vec3<T>,
    /// 1-based rank within the class.
    pub index_in_class: usize,
}

pub fn make_label(name: &str, index: usize) -> String {
    format!("{name}{index}")
}

/// Sorts each class along `axis` and labels it `name1..nameK`. Classes keep the order
/// in which they first appear; equal coordinates keep input order.
pub fn sort_and_label<T: Real>(detections: &[(String, Vec3<T>)], axis: LateralAxis) -> Vec<LabeledObject<T>> {
    let mut classes: Vec<&str> = Vec::new();
    for (name, _) in detections {
        if !classes.contains(&name.as_str()) {
            classes.push(name);
        }
    }
    let mut out = Vec::with_capacity(detections.len());
    for class in classes {
        let mut members: Vec<&Vec3<T>> = detections.iter().filter(|(n, _)| n == class).map(|(_, p)| p).collect();
        members.sort_by(|a, b| axis.coordinate(*a).partial_cmp(&axis.coordinate(*b)).unwrap_or(std::cmp::Ordering::Equal));
        for (k, p) in members.into_iter().enumerate() {
            out.push(LabeledObject {
                label: make_label(class, k + 1),
                name: class.to_string(),
                position_world: *p,
                index_in_class: k + 1,
            });
        }
    }
    out
}
