//! Task success predicates, evaluated on the true scene before and after execution.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::planner::rulebook::{decompose, normalize};
use crate::planner::WorldModel;
use crate::scene::Scene;

/// Lateral tolerance for placements, per axis.
pub const SUCCESS_MARGIN: f64 = 0.0115;
/// Vertical gap allowed between a placed object's bottom and its support's top.
pub const REST_TOLERANCE: f64 = 0.005;
pub const OPEN_FRACTION: f64 = 0.9;
pub const CLOSED_ANGLE: f64 = 0.05;
/// Displacement that counts as having picked something up.
pub const PICK_DISPLACEMENT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuccessError {
    #[error("no success predicate for `{0}`")]
    Unknown(String),
    #[error("`{0}` names no object in the scene")]
    UnknownObject(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Open(String),
    Closed(String),
    Powered(String),
    On {
        object: String,
        support: String,
    },
    Inside {
        object: String,
        container: String,
    },
    Moved(String),
    /// Every graspable object ends up inside the container.
    AllInside(String),
}

fn re(p: &str) -> Regex {
    Regex::new(p).expect("static pattern")
}

static CLEAN: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:clean|clear|tidy)(?: up)? the table$"));
static OPEN: LazyLock<Regex> = LazyLock::new(|| re(r"^open (?:the )?(.+)$"));
static CLOSE: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:close|shut) (?:the )?(.+)$"));
static POWER: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:power|turn|switch) on (?:the )?(.+)$"));
static INTO: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:put|place|move) (?:the )?(.+?) (?:into|inside|in) (?:the )?(.+)$"));
static ONTO: LazyLock<Regex> =
    LazyLock::new(|| re(r"^(?:put|place|stack|set|move) (?:the )?(.+?) (?:on top of|onto|on) (?:the )?(.+)$"));
static PICK: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:pick up|pick|grab|take) (?:up )?(?:the )?(.+?)(?: up)?$"));

fn step_predicate(step: &str, world: &WorldModel) -> Result<Predicate, SuccessError> {
    let id = |phrase: &str| world.resolve_phrase(phrase).map_err(|_| SuccessError::UnknownObject(phrase.to_string()));
    let s = step.trim_matches([',', ';', ' ']);
    if let Some(c) = POWER.captures(s) {
        return Ok(Predicate::Powered(id(&c[1])?));
    }
    if let Some(c) = OPEN.captures(s) {
        return Ok(Predicate::Open(id(&c[1])?));
    }
    if let Some(c) = CLOSE.captures(s) {
        return Ok(Predicate::Closed(id(&c[1])?));
    }
    if let Some(c) = INTO.captures(s) {
        return Ok(Predicate::Inside { object: id(&c[1])?, container: id(&c[2])? });
    }
    if let Some(c) = ONTO.captures(s) {
        return Ok(Predicate::On { object: id(&c[1])?, support: id(&c[2])? });
    }
    if let Some(c) = PICK.captures(s) {
        return Ok(Predicate::Moved(id(&c[1])?));
    }
    Err(SuccessError::Unknown(step.to_string()))
}

/// Predicates a task must satisfy. Object names resolve against the true scene.
pub fn predicates_for(task: &str, before: &Scene) -> Result<Vec<Predicate>, SuccessError> {
    let world = WorldModel::ground_truth(before);
    let n = normalize(task);
    if CLEAN.is_match(n.trim_matches([',', ';', ' '])) {
        let storage = world.resolve_phrase("storage").map_err(|_| SuccessError::UnknownObject("storage".into()))?;
        return Ok(vec![Predicate::AllInside(storage)]);
    }
    let steps = match decompose(task, &world) {
        Ok(Some(steps)) => steps,
        Ok(None) => vec![n],
        Err(_) => return Err(SuccessError::Unknown(task.to_string())),
    };
    let preds = steps.iter().map(|s| step_predicate(s, &world)).collect::<Result<Vec<_>, _>>()?;
    // An opening that a later step closes again is a means, not an end.
    Ok(preds
        .iter()
        .enumerate()
        .filter(|(i, p)| match p {
            Predicate::Open(x) => !preds[i + 1..].iter().any(|q| q == &Predicate::Closed(x.clone())),
            _ => true,
        })
        .map(|(_, p)| p.clone())
        .collect())
}

fn holds(p: &Predicate, before: &Scene, after: &Scene) -> bool {
    let obj = |id: &str| after.object(id);
    match p {
        Predicate::Open(id) => obj(id)
            .and_then(|o| o.articulation.as_ref().map(|a| o.state.door_angle >= OPEN_FRACTION * a.open_angle))
            .unwrap_or(false),
        Predicate::Closed(id) => obj(id).is_some_and(|o| o.articulation.is_some() && o.state.door_angle <= CLOSED_ANGLE),
        Predicate::Powered(id) => obj(id).is_some_and(|o| o.state.powered),
        Predicate::On { object, support } => match (obj(object), obj(support)) {
            (Some(o), Some(s)) => {
                (o.position.x - s.position.x).abs() <= SUCCESS_MARGIN
                    && (o.position.y - s.position.y).abs() <= SUCCESS_MARGIN
                    && (o.bottom() - s.top()).abs() <= REST_TOLERANCE
                    && after.robot.held_object() != Some(object.as_str())
            }
            _ => false,
        },
        Predicate::Inside { object, container } => match (obj(object), obj(container)) {
            (Some(o), Some(c)) => c.cavity_contains(&o.position, 0.0) && after.robot.held_object() != Some(object.as_str()),
            _ => false,
        },
        Predicate::Moved(id) => match (before.object(id), obj(id)) {
            (Some(a), Some(b)) => (b.position - a.position).norm() >= PICK_DISPLACEMENT,
            _ => false,
        },
        Predicate::AllInside(container) => {
            let Some(c) = obj(container) else { return false };
            after.objects.iter().filter(|o| o.graspable).all(|o| c.cavity_contains(&o.position, 0.0))
                && after.robot.held_object().is_none()
        }
    }
}

pub fn check_success(task: &str, before: &Scene, after: &Scene) -> Result<bool, SuccessError> {
    let preds = predicates_for(task, before)?;
    Ok(preds.iter().all(|p| holds(p, before, after)))
}
