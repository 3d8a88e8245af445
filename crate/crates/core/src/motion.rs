//! The closed set of robot primitives a plan is made of.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    MoveToPosition,
    GripperControl,
    BaseCycleMove,
    CloseMove,
    RotateWaist,
    DmpPublish,
}

impl MotionKind {
    pub const ALL: [MotionKind; 6] = [
        MotionKind::MoveToPosition,
        MotionKind::GripperControl,
        MotionKind::BaseCycleMove,
        MotionKind::CloseMove,
        MotionKind::RotateWaist,
        MotionKind::DmpPublish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionKind::MoveToPosition => "move_to_position",
            MotionKind::GripperControl => "gripper_control",
            MotionKind::BaseCycleMove => "base_cycle_move",
            MotionKind::CloseMove => "close_move",
            MotionKind::RotateWaist => "rotate_waist",
            MotionKind::DmpPublish => "dmp_publish",
        }
    }

    /// Whether the argument names a place in the scene.
    pub fn takes_position(self) -> bool {
        matches!(self, MotionKind::MoveToPosition | MotionKind::CloseMove)
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionKind {
    type Err = MotionParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MotionKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| MotionParseError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MotionParseError {
    #[error("unknown motion kind `{0}`")]
    UnknownKind(String),
    #[error("malformed motion `{0}`")]
    Malformed(String),
    #[error("empty argument in `{0}`")]
    EmptyArgument(String),
}

/// Gripper argument symbols and their aperture.
pub const GRIPPER_MODES: [(&str, f64); 3] = [("open", 1.0), ("close", 0.0), ("close_low", 0.35)];

/// Argument of `base_cycle_move`, resolved from the grasped door at run time.
pub const RADIUS_SYMBOL: &str = "radius_door2axis";

pub fn gripper_aperture(mode: &str) -> Option<f64> {
    GRIPPER_MODES.iter().find(|(m, _)| *m == mode).map(|&(_, a)| a)
}

/// One primitive call such as `move_to_position(apple)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionFunction {
    pub kind: MotionKind,
    pub arg: String,
}

impl MotionFunction {
    pub fn new(kind: MotionKind, arg: impl Into<String>) -> Self {
        MotionFunction { kind, arg: arg.into() }
    }

    pub fn move_to(arg: impl Into<String>) -> Self {
        Self::new(MotionKind::MoveToPosition, arg)
    }

    pub fn gripper(arg: impl Into<String>) -> Self {
        Self::new(MotionKind::GripperControl, arg)
    }

    pub fn dmp(arg: impl Into<String>) -> Self {
        Self::new(MotionKind::DmpPublish, arg)
    }

    /// Gripper close in any effort mode.
    pub fn is_close(&self) -> bool {
        self.kind == MotionKind::GripperControl && self.arg.starts_with("close")
    }

    pub fn is_open(&self) -> bool {
        self.kind == MotionKind::GripperControl && self.arg == "open"
    }
}

impl fmt::Display for MotionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.arg)
    }
}

impl FromStr for MotionFunction {
    type Err = MotionParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| MotionParseError::Malformed(s.to_string()))?;
        if !s.ends_with(')') || s[open + 1..s.len() - 1].contains(['(', ')']) {
            return Err(MotionParseError::Malformed(s.to_string()));
        }
        let kind: MotionKind = s[..open].trim().parse()?;
        let arg = s[open + 1..s.len() - 1].trim();
        if arg.is_empty() {
            return Err(MotionParseError::EmptyArgument(s.to_string()));
        }
        let valid = arg.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
        if !valid {
            return Err(MotionParseError::Malformed(s.to_string()));
        }
        Ok(MotionFunction::new(kind, arg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        for kind in MotionKind::ALL {
            let m = MotionFunction::new(kind, "plate_above");
            assert_eq!(m.to_string().parse::<MotionFunction>().unwrap(), m);
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!("fly(apple)".parse::<MotionFunction>(), Err(MotionParseError::UnknownKind(_))));
        assert!(matches!("move_to_position()".parse::<MotionFunction>(), Err(MotionParseError::EmptyArgument(_))));
        assert!("move_to_position(apple".parse::<MotionFunction>().is_err());
        assert!("move_to_position(a b)".parse::<MotionFunction>().is_err());
        assert!("move_to_position((a))".parse::<MotionFunction>().is_err());
    }

    #[test]
    fn numeric_args_parse() {
        let m: MotionFunction = "rotate_waist(45)".parse().unwrap();
        assert_eq!(m.kind, MotionKind::RotateWaist);
        assert_eq!(m.arg, "45");
    }

    #[test]
    fn gripper_table() {
        assert_eq!(gripper_aperture("close_low"), Some(0.35));
        assert_eq!(gripper_aperture("grab"), None);
    }
}
