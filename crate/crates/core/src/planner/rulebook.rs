//! Deterministic template backend. Decomposition and motion templates follow the
//! worked examples in the bundled prompt, with a small pattern table for paraphrases.

use std::sync::LazyLock;

use regex::Regex;

use super::backend::{BackendError, LanguageBackend, PlanRequest};
use super::dsl::{self, DraftSubTask};
use super::world::{PhraseError, WorldModel, HOME_SYMBOL};
use crate::motion::{MotionFunction, MotionKind, RADIUS_SYMBOL};

/// Objects grasped with the reduced-effort mode.
pub const DELICATE: [&str; 6] = ["apple", "egg", "tomato", "peach", "banana", "orange"];
pub const POWER_ON_DEGREES: &str = "45";
pub const STORAGE: &str = "storage";

const ORDINAL_WORDS: [&str; 10] = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

fn re(p: &str) -> Regex {
    Regex::new(p).expect("static pattern")
}

static THEN: LazyLock<Regex> = LazyLock::new(|| re(r"\s*(?:,\s*and then|,\s*then|\band then|;\s*then|\bthen)\s+"));
static WARM: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:warm up|heat up|heat|warm) (?:the )?(.+)$"));
static ROAST: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:roast|bake) (?:the )?(.+)$"));
static CLEAN: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:clean|clear|tidy)(?: up)? the table$"));
static OPEN: LazyLock<Regex> = LazyLock::new(|| re(r"^open (?:the )?(.+)$"));
static CLOSE: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:close|shut) (?:the )?(.+)$"));
static POWER: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:power|turn|switch) on (?:the )?(.+)$"));
static INTO: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:put|place|move) (?:the )?(.+?) (?:into|inside|in) (?:the )?(.+)$"));
static ONTO: LazyLock<Regex> =
    LazyLock::new(|| re(r"^(?:put|place|stack|set|move) (?:the )?(.+?) (?:on top of|onto|on) (?:the )?(.+)$"));
static PICK: LazyLock<Regex> = LazyLock::new(|| re(r"^(?:pick up|pick|grab|take) (?:up )?(?:the )?(.+?)(?: up)?$"));

/// Lowercases and drops punctuation other than commas and semicolons.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' || c == ',' || c == ';' { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ").trim_matches([',', ';', ' ']).to_string()
}

fn clean_part(s: &str) -> String {
    s.trim_matches([',', ';', ' ']).replace([',', ';'], "")
}

/// Sub-task descriptions for a long-horizon task, `None` when the task is a single step.
pub fn decompose(task: &str, world: &WorldModel) -> Result<Option<Vec<String>>, BackendError> {
    let n = normalize(task);
    let parts: Vec<String> = THEN.split(&n).map(clean_part).filter(|p| !p.is_empty()).collect();
    if parts.len() >= 2 {
        let mut out = Vec::new();
        for p in parts {
            match decompose(&p, world)? {
                Some(sub) => out.extend(sub),
                None => out.push(p),
            }
        }
        return Ok(Some(out));
    }
    let n = clean_part(&n);
    if let Some(c) = WARM.captures(&n) {
        let x = &c[1];
        return Ok(Some(vec![
            "open the microwave".into(),
            format!("put the {x} into the microwave"),
            "close the microwave".into(),
            "power on the microwave".into(),
        ]));
    }
    if let Some(c) = ROAST.captures(&n) {
        let x = &c[1];
        return Ok(Some(vec![
            "open the oven".into(),
            format!("put the {x} into oven"),
            "close the oven".into(),
            "power on the oven".into(),
        ]));
    }
    if CLEAN.is_match(&n) {
        if world.count(STORAGE) == 0 {
            return Err(BackendError::Unsupported(n));
        }
        let mut out = Vec::new();
        for (class, count) in world.inventory() {
            if !world.class(&class).is_some_and(|c| c.graspable) {
                continue;
            }
            if count == 1 {
                out.push(format!("put the {class} in the {STORAGE}"));
            } else {
                for k in 0..count {
                    let ord = ORDINAL_WORDS.get(k).map(|s| s.to_string()).unwrap_or_else(|| format!("{}th", k + 1));
                    out.push(format!("put the {ord} {class} in the {STORAGE}"));
                }
            }
        }
        return Ok(Some(out));
    }
    Ok(None)
}

/// Symbol for a noun phrase. Phrases that do not resolve are passed through as a
/// single token, the way a language model would name them; binding rejects them later.
fn symbol(world: &WorldModel, phrase: &str) -> Result<(String, Option<String>), BackendError> {
    match world.resolve_phrase(phrase) {
        Ok(label) => {
            let class = world.by_label(&label).map(|o| o.name.clone());
            Ok((world.symbol_for(&label).unwrap_or(label), class))
        }
        Err(PhraseError::Ambiguous { .. }) => Err(BackendError::Unsupported(phrase.to_string())),
        Err(PhraseError::Unknown(_)) => {
            let words: Vec<&str> = phrase.split_whitespace().filter(|w| *w != "the").collect();
            Ok((words.join("_"), None))
        }
    }
}

fn transfer(world: &WorldModel, subject: &str, target: &str, into: bool) -> Result<Vec<MotionFunction>, BackendError> {
    let (x, x_class) = symbol(world, subject)?;
    let (y, y_class) = symbol(world, target)?;
    let grip = if x_class.as_deref().is_some_and(|c| DELICATE.contains(&c)) { "close_low" } else { "close" };
    let place = if into {
        format!("{y}_inside")
    } else if y_class.and_then(|c| world.class(&c)).is_some_and(|c| !c.graspable) {
        y
    } else {
        format!("{y}_above")
    };
    Ok(vec![
        MotionFunction::move_to(HOME_SYMBOL),
        MotionFunction::move_to(x),
        MotionFunction::gripper(grip),
        MotionFunction::move_to(HOME_SYMBOL),
        MotionFunction::move_to(place),
        MotionFunction::gripper("open"),
        MotionFunction::move_to(HOME_SYMBOL),
    ])
}

/// Basic-library motions for one step.
pub fn compile(description: &str, world: &WorldModel) -> Result<Vec<MotionFunction>, BackendError> {
    let n = clean_part(&normalize(description));
    if let Some(c) = POWER.captures(&n) {
        let (x, _) = symbol(world, &c[1])?;
        return Ok(vec![
            MotionFunction::move_to(format!("{x}_knob")),
            MotionFunction::new(MotionKind::RotateWaist, POWER_ON_DEGREES),
        ]);
    }
    if let Some(c) = OPEN.captures(&n) {
        let (x, class) = symbol(world, &c[1])?;
        let has_handle = class.and_then(|c| world.class(&c)).is_some_and(|c| c.has_handle);
        let target = if has_handle { format!("{x}_handle") } else { x };
        return Ok(vec![
            MotionFunction::move_to(target),
            MotionFunction::gripper("close"),
            MotionFunction::new(MotionKind::BaseCycleMove, RADIUS_SYMBOL),
            MotionFunction::gripper("open"),
        ]);
    }
    if let Some(c) = CLOSE.captures(&n) {
        let (x, _) = symbol(world, &c[1])?;
        return Ok(vec![MotionFunction::new(MotionKind::CloseMove, x)]);
    }
    if let Some(c) = INTO.captures(&n) {
        return transfer(world, &c[1], &c[2], true);
    }
    if let Some(c) = ONTO.captures(&n) {
        return transfer(world, &c[1], &c[2], false);
    }
    if let Some(c) = PICK.captures(&n) {
        let (x, class) = symbol(world, &c[1])?;
        let grip = if class.as_deref().is_some_and(|c| DELICATE.contains(&c)) { "close_low" } else { "close" };
        return Ok(vec![
            MotionFunction::move_to(HOME_SYMBOL),
            MotionFunction::move_to(x),
            MotionFunction::gripper(grip),
            MotionFunction::move_to(HOME_SYMBOL),
            MotionFunction::gripper("open"),
        ]);
    }
    Err(BackendError::Unsupported(n))
}

/// Sub-task drafts for a whole task.
pub fn draft(task: &str, world: &WorldModel) -> Result<Vec<DraftSubTask>, BackendError> {
    let descriptions = decompose(task, world)?.unwrap_or_else(|| vec![clean_part(&normalize(task))]);
    descriptions.into_iter().map(|d| compile(&d, world).map(|motions| DraftSubTask { description: d, motions })).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl LanguageBackend for RuleBackend {
    fn name(&self) -> &str {
        "rule"
    }

    fn complete(&self, request: &PlanRequest<'_>) -> Result<String, BackendError> {
        draft(request.task, request.world).map(|d| dsl::emit(&d))
    }
}
