//! Line-oriented plan text: `subtask: <description>` opens a sub-task, `mf: kind(arg)`
//! appends a motion to it, `#` starts a comment line.

use thiserror::Error;

use crate::motion::{MotionFunction, MotionParseError};

pub const SUBTASK_PREFIX: &str = "subtask:";
pub const MOTION_PREFIX: &str = "mf:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftSubTask {
    pub description: String,
    pub motions: Vec<MotionFunction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("line {line}: motion before any sub-task")]
    OrphanMotion { line: usize },
    #[error("line {line}: {source}")]
    Motion { line: usize, source: MotionParseError },
    #[error("line {line}: unrecognised line `{text}`")]
    Unrecognised { line: usize, text: String },
    #[error("line {line}: empty sub-task description")]
    EmptyDescription { line: usize },
    #[error("sub-task `{0}` has no motion functions")]
    EmptySubTask(String),
    #[error("no sub-tasks")]
    Empty,
}

/// Parses plan text. Every sub-task must carry at least one motion.
pub fn parse(text: &str) -> Result<Vec<DraftSubTask>, DslError> {
    let mut out: Vec<DraftSubTask> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix(SUBTASK_PREFIX) {
            let description = rest.trim();
            if description.is_empty() {
                return Err(DslError::EmptyDescription { line });
            }
            out.push(DraftSubTask { description: description.to_string(), motions: Vec::new() });
        } else if let Some(rest) = l.strip_prefix(MOTION_PREFIX) {
            let motion = rest.parse().map_err(|source| DslError::Motion { line, source })?;
            out.last_mut().ok_or(DslError::OrphanMotion { line })?.motions.push(motion);
        } else {
            return Err(DslError::Unrecognised { line, text: l.to_string() });
        }
    }
    if let Some(empty) = out.iter().find(|s| s.motions.is_empty()) {
        return Err(DslError::EmptySubTask(empty.description.clone()));
    }
    if out.is_empty() {
        return Err(DslError::Empty);
    }
    Ok(out)
}

pub fn emit_subtask(out: &mut String, description: &str, motions: &[MotionFunction]) {
    out.push_str(SUBTASK_PREFIX);
    out.push(' ');
    out.push_str(description);
    out.push('\n');
    for m in motions {
        out.push_str(MOTION_PREFIX);
        out.push(' ');
        out.push_str(&m.to_string());
        out.push('\n');
    }
}

pub fn emit(subtasks: &[DraftSubTask]) -> String {
    let mut s = String::new();
    for st in subtasks {
        emit_subtask(&mut s, &st.description, &st.motions);
    }
    s
}
