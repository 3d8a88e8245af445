//! Task planning: classify, decompose, compile to motion functions, substitute
//! learned skills, bind symbols and clear obstacles from approach paths.

pub mod backend;
pub mod dsl;
pub mod prompt;
pub mod rulebook;
pub mod world;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{BackendError, LanguageBackend, PlanRequest, RemoteBackend, RemoteConfig};
pub use dsl::{DraftSubTask, DslError};
pub use prompt::PromptContext;
pub use rulebook::RuleBackend;
pub use world::{Binding, ClassModel, Part, PhraseError, WorldModel, HOME_SYMBOL};

use crate::library::SkillLibrary;
use crate::motion::{gripper_aperture, MotionFunction, MotionKind, RADIUS_SYMBOL};
use crate::perception::{identify_obstacles, LabeledObject, ObstacleError};

pub const CLARIFICATION_QUESTION: &str = "There are multiple objects share the same name, which one do you prefer?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Short,
    Long,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTask {
    pub description: String,
    pub motions: Vec<MotionFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_name: Option<String>,
}

impl SubTask {
    pub fn uses_dmp(&self) -> bool {
        self.motions.iter().any(|m| m.kind == MotionKind::DmpPublish)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub task_text: String,
    pub horizon: Horizon,
    pub subtasks: Vec<SubTask>,
    pub bound_symbols: BTreeMap<String, Binding>,
}

impl Plan {
    pub fn motions(&self) -> impl Iterator<Item = &MotionFunction> {
        self.subtasks.iter().flat_map(|s| s.motions.iter())
    }

    /// Plan text in the line format.
    pub fn to_dsl(&self) -> String {
        let mut s = String::new();
        for st in &self.subtasks {
            dsl::emit_subtask(&mut s, &st.description, &st.motions);
        }
        s
    }

    /// Positional arguments that are neither bound nor `init`.
    pub fn unbound_symbols(&self) -> Vec<String> {
        self.motions()
            .filter(|m| m.kind.takes_position() && m.arg != HOME_SYMBOL && !self.bound_symbols.contains_key(&m.arg))
            .map(|m| m.arg.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("empty task")]
    EmptyTask,
    #[error("{question}")]
    Clarification { question: String, phrase: String, candidates: Vec<String> },
    #[error("unresolved symbol `{0}`")]
    UnresolvedSymbol(String),
    #[error("invalid argument in `{0}`")]
    InvalidArgument(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unparseable plan ({source}):\n{raw}")]
    Dsl { raw: String, source: DslError },
    #[error("cannot derive a skill name from `{0}`")]
    Naming(String),
    #[error("clearance zone blocked by {0}")]
    ClearanceBlocked(String),
    #[error("clarification answer `{0}` does not pick an object")]
    BadAnswer(String),
    #[error(transparent)]
    Geometry(#[from] ObstacleError),
}

impl PlannerError {
    /// Failures of the emitted plan itself, as opposed to ambiguity or empty input.
    pub fn is_executability_failure(&self) -> bool {
        !matches!(self, PlannerError::EmptyTask | PlannerError::Clarification { .. } | PlannerError::BadAnswer(_))
    }
}

/// Fault probabilities applied to emitted plans.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanFaults {
    /// Chance that a `dmp_publish` key gains or loses its `_handle` part.
    #[serde(default)]
    pub perturb_skill_key: f64,
    /// Chance that a sub-task is emitted without motion functions.
    #[serde(default)]
    pub drop_motions: f64,
}

impl PlanFaults {
    pub fn is_none(&self) -> bool {
        self.perturb_skill_key <= 0.0 && self.drop_motions <= 0.0
    }
}

/// `<action>_<target>` in lowercase with spaces as underscores.
pub fn skill_name(action: &str, target: &str) -> Result<String, PlannerError> {
    let clean = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join("_");
    let (a, t) = (clean(action), clean(target));
    let ok = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok(&a) || !ok(&t) {
        return Err(PlannerError::Naming(format!("{action} {target}")));
    }
    Ok(format!("{a}_{t}"))
}

/// Skill name for a sub-task: its verb plus the first place its basic motions visit.
pub fn propose_skill_name(description: &str, motions: &[MotionFunction]) -> Result<String, PlannerError> {
    let action = description.split_whitespace().next().ok_or_else(|| PlannerError::Naming(description.to_string()))?;
    let target = motions
        .iter()
        .find(|m| m.kind.takes_position() && m.arg != HOME_SYMBOL)
        .ok_or_else(|| PlannerError::Naming(description.to_string()))?;
    skill_name(action, &target.arg)
}

fn perturb_key(name: &str) -> String {
    if let Some(stem) = name.strip_suffix("_handle_ex") {
        format!("{stem}_ex")
    } else if let Some(stem) = name.strip_suffix("_handle") {
        stem.to_string()
    } else if let Some(stem) = name.strip_suffix("_ex") {
        format!("{stem}_handle_ex")
    } else {
        format!("{name}_handle")
    }
}

#[derive(Clone)]
pub struct Planner {
    backend: Arc<dyn LanguageBackend>,
    context: PromptContext,
}

impl std::fmt::Debug for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Planner").field("backend", &self.backend.name()).finish()
    }
}

impl Default for Planner {
    fn default() -> Self {
        Planner::new(Arc::new(RuleBackend))
    }
}

impl Planner {
    pub fn new(backend: Arc<dyn LanguageBackend>) -> Self {
        Planner { backend, context: PromptContext::standard() }
    }

    pub fn with_context(mut self, context: PromptContext) -> Self {
        self.context = context;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    fn raw_plan(&self, task: &str, world: &WorldModel) -> Result<String, PlannerError> {
        let context = self.context.clone().with_inventory(world.inventory());
        Ok(self.backend.complete(&PlanRequest { task, context: &context, world })?)
    }

    fn drafts(&self, task: &str, world: &WorldModel) -> Result<Vec<DraftSubTask>, PlannerError> {
        let raw = self.raw_plan(task, world)?;
        dsl::parse(&raw).map_err(|source| PlannerError::Dsl { raw, source })
    }

    pub fn classify_task(&self, task: &str, world: &WorldModel) -> Result<Horizon, PlannerError> {
        if task.trim().is_empty() {
            return Err(PlannerError::EmptyTask);
        }
        Ok(if self.drafts(task, world)?.len() >= 2 { Horizon::Long } else { Horizon::Short })
    }

    pub fn decompose(&self, task: &str, world: &WorldModel) -> Result<Vec<String>, PlannerError> {
        if task.trim().is_empty() {
            return Err(PlannerError::EmptyTask);
        }
        Ok(self.drafts(task, world)?.into_iter().map(|d| d.description).collect())
    }

    /// Detects a bare class name that matches several objects.
    pub fn check_ambiguity(task: &str, world: &WorldModel) -> Result<(), PlannerError> {
        let n = rulebook::normalize(task).replace([',', ';'], " ");
        let words: Vec<&str> = n.split_whitespace().collect();
        for (i, w) in words.iter().enumerate() {
            if world.count(w) < 2 {
                continue;
            }
            let modified = i > 0 && world::is_modifier(words[i - 1]);
            if !modified {
                let candidates = world.objects.iter().filter(|o| o.name == *w).map(|o| o.label.clone()).collect();
                return Err(PlannerError::Clarification {
                    question: CLARIFICATION_QUESTION.to_string(),
                    phrase: w.to_string(),
                    candidates,
                });
            }
        }
        Ok(())
    }

    /// Rewrites `task` so the ambiguous class word names the object chosen in `answer`
    /// (a label, a number, an ordinal or left/middle/right).
    pub fn clarify(task: &str, phrase: &str, answer: &str, world: &WorldModel) -> Result<String, PlannerError> {
        let bad = || PlannerError::BadAnswer(answer.to_string());
        let a = rulebook::normalize(answer);
        let words: Vec<&str> = a.split_whitespace().filter(|w| !matches!(*w, "the" | "one" | "please") && *w != phrase).collect();
        let [word] = words.as_slice() else { return Err(bad()) };
        let label = match world.by_label(word) {
            Some(o) if o.name == phrase => o.label.clone(),
            Some(_) => return Err(bad()),
            None => {
                let idx = world::modifier_index(word, world.count(phrase)).ok_or_else(bad)?;
                world.objects.iter().find(|o| o.name == phrase && o.index_in_class == idx).ok_or_else(bad)?.label.clone()
            }
        };
        let n = rulebook::normalize(task);
        let mut replaced = false;
        let out: Vec<String> = n
            .split(' ')
            .map(|w| {
                let core = w.trim_end_matches([',', ';']);
                if !replaced && core == phrase {
                    replaced = true;
                    format!("{label}{}", &w[core.len()..])
                } else {
                    w.to_string()
                }
            })
            .collect();
        if !replaced {
            return Err(bad());
        }
        Ok(out.join(" "))
    }

    /// Compiles one step, substituting a stored skill when its name is in the library.
    pub fn compile_subtask(
        &self,
        description: &str,
        world: &WorldModel,
        library: &SkillLibrary,
    ) -> Result<SubTask, PlannerError> {
        let drafts = self.drafts(description, world)?;
        let d = drafts.into_iter().next().ok_or(PlannerError::EmptyTask)?;
        Ok(substitute(d, library))
    }

    pub fn plan_task(&self, task: &str, world: &WorldModel, library: &SkillLibrary) -> Result<Plan, PlannerError> {
        self.plan_with_faults(
            task,
            world,
            library,
            &PlanFaults::default(),
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
        )
    }

    pub fn plan_with_faults<R: Rng + ?Sized>(
        &self,
        task: &str,
        world: &WorldModel,
        library: &SkillLibrary,
        faults: &PlanFaults,
        rng: &mut R,
    ) -> Result<Plan, PlannerError> {
        if task.trim().is_empty() {
            return Err(PlannerError::EmptyTask);
        }
        Self::check_ambiguity(task, world)?;
        let mut raw = self.raw_plan(task, world)?;
        if faults.drop_motions > 0.0 {
            raw = drop_motions(&raw, faults.drop_motions, rng);
        }
        let drafts = dsl::parse(&raw).map_err(|source| PlannerError::Dsl { raw: raw.clone(), source })?;
        let mut subtasks: Vec<SubTask> = drafts.into_iter().map(|d| substitute(d, library)).collect();
        if faults.perturb_skill_key > 0.0 {
            for m in subtasks.iter_mut().flat_map(|s| s.motions.iter_mut()) {
                if m.kind == MotionKind::DmpPublish && rng.random::<f64>() < faults.perturb_skill_key {
                    m.arg = perturb_key(&m.arg);
                }
            }
        }
        let horizon = if subtasks.len() >= 2 { Horizon::Long } else { Horizon::Short };
        let mut plan = Plan { task_text: task.trim().to_string(), horizon, subtasks, bound_symbols: BTreeMap::new() };
        bind(&mut plan, world, library)?;
        inject_obstacle_removal(&mut plan, world)?;
        Ok(plan)
    }
}

fn drop_motions<R: Rng + ?Sized>(raw: &str, p: f64, rng: &mut R) -> String {
    let mut out = String::new();
    let mut dropping = false;
    for line in raw.lines() {
        let t = line.trim();
        if t.starts_with(dsl::SUBTASK_PREFIX) {
            dropping = rng.random::<f64>() < p;
        } else if dropping && t.starts_with(dsl::MOTION_PREFIX) {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn substitute(d: DraftSubTask, library: &SkillLibrary) -> SubTask {
    if let Ok(name) = propose_skill_name(&d.description, &d.motions) {
        if let Some(rec) = library.skill(&name) {
            return SubTask { description: d.description, motions: rec.motions.clone(), skill_name: Some(name) };
        }
    }
    let skill_name = d
        .motions
        .iter()
        .find(|m| m.kind == MotionKind::DmpPublish)
        .map(|m| library.owner_of(&m.arg).map(|r| r.name.clone()).unwrap_or_else(|| m.arg.clone()));
    SubTask { description: d.description, motions: d.motions, skill_name }
}

/// A basic sub-task with a stored skill under its proposed name, rewritten to use it.
pub fn resubstitute(st: &SubTask, library: &SkillLibrary) -> Option<SubTask> {
    let name = propose_skill_name(&st.description, &st.motions).ok()?;
    let rec = library.skill(&name)?;
    (rec.motions != st.motions).then(|| SubTask {
        description: st.description.clone(),
        motions: rec.motions.clone(),
        skill_name: Some(name),
    })
}

/// Binds every positional argument and checks the non-positional ones.
pub fn bind(plan: &mut Plan, world: &WorldModel, library: &SkillLibrary) -> Result<(), PlannerError> {
    let mut bound = std::mem::take(&mut plan.bound_symbols);
    let mut bind_one = |sym: &str| -> Result<(), PlannerError> {
        if sym == HOME_SYMBOL || bound.contains_key(sym) {
            return Ok(());
        }
        let b = world.resolve_symbol(sym).ok_or_else(|| PlannerError::UnresolvedSymbol(sym.to_string()))?;
        bound.insert(sym.to_string(), b);
        Ok(())
    };
    for m in plan.motions() {
        match m.kind {
            MotionKind::MoveToPosition | MotionKind::CloseMove => bind_one(&m.arg)?,
            MotionKind::GripperControl if gripper_aperture(&m.arg).is_none() => {
                return Err(PlannerError::InvalidArgument(m.to_string()))
            }
            MotionKind::BaseCycleMove if m.arg != RADIUS_SYMBOL => return Err(PlannerError::InvalidArgument(m.to_string())),
            MotionKind::RotateWaist if m.arg.parse::<f64>().map_or(true, |d| !d.is_finite()) => {
                return Err(PlannerError::InvalidArgument(m.to_string()))
            }
            MotionKind::DmpPublish => {
                // An unknown key is left for the executor to report as a skill miss.
                if let Some(anchor) = library.owner_of(&m.arg).and_then(|r| r.anchor.as_ref()) {
                    bind_one(&anchor.symbol)?;
                }
            }
            _ => {}
        }
    }
    plan.bound_symbols = bound;
    Ok(())
}

/// Labels of objects a sub-task refers to.
fn referenced_labels(st: &SubTask, plan: &Plan) -> BTreeSet<String> {
    st.motions.iter().filter_map(|m| plan.bound_symbols.get(&m.arg)).filter_map(|b| b.label.clone()).collect()
}

/// Label of the object a sub-task picks up, if any.
fn grasped_label(st: &SubTask, plan: &Plan) -> Option<String> {
    let close = st.motions.iter().position(|m| m.is_close())?;
    st.motions[..close]
        .iter()
        .rev()
        .filter(|m| m.kind == MotionKind::MoveToPosition)
        .find_map(|m| plan.bound_symbols.get(&m.arg))
        .filter(|b| b.part == Part::Center)
        .and_then(|b| b.label.clone())
}

fn removal_subtask(symbol: &str, spot: &str) -> SubTask {
    SubTask {
        description: format!("move the {symbol} to the {spot}"),
        motions: vec![
            MotionFunction::move_to(HOME_SYMBOL),
            MotionFunction::move_to(symbol),
            MotionFunction::gripper("close"),
            MotionFunction::move_to(HOME_SYMBOL),
            MotionFunction::move_to(spot),
            MotionFunction::gripper("open"),
            MotionFunction::move_to(HOME_SYMBOL),
        ],
        skill_name: None,
    }
}

struct Clearing<'a> {
    world: &'a WorldModel,
    moved: BTreeSet<String>,
    slot: usize,
    bound: BTreeMap<String, Binding>,
}

impl Clearing<'_> {
    fn workspace(&self) -> Vec<LabeledObject<f64>> {
        self.world
            .objects
            .iter()
            .filter(|o| self.world.class(&o.name).is_some_and(|c| c.graspable) && !self.moved.contains(&o.label))
            .cloned()
            .collect()
    }

    /// Removal sub-tasks needed before `target` can be approached, nearest obstacle first.
    fn clear(
        &mut self,
        target: &crate::geom::Vec3<f64>,
        exclude: &BTreeSet<String>,
        out: &mut Vec<SubTask>,
    ) -> Result<(), PlannerError> {
        let ex: Vec<&str> = exclude.iter().map(String::as_str).collect();
        let report = identify_obstacles(target, &self.world.robot_base, &self.workspace(), &ex)?;
        for ob in report.obstacles() {
            if self.moved.contains(&ob.label) {
                continue;
            }
            self.moved.insert(ob.label.clone());
            let mut own = exclude.clone();
            own.insert(ob.label.clone());
            self.clear(&ob.position_world, &own, out)?;
            let spot_sym = WorldModel::clearance_symbol(self.slot);
            let spot =
                self.world.clearance_spot(self.slot).ok_or_else(|| PlannerError::ClearanceBlocked("no clearance zone".into()))?;
            self.slot += 1;
            let ex: Vec<&str> = own.iter().map(String::as_str).collect();
            let blocking = identify_obstacles(&spot, &self.world.robot_base, &self.workspace(), &ex)?;
            if let Some(b) = blocking.obstacles().first() {
                return Err(PlannerError::ClearanceBlocked(b.label.clone()));
            }
            let sym = self.world.symbol_for(&ob.label).unwrap_or_else(|| ob.label.clone());
            self.bound
                .insert(sym.clone(), Binding { label: Some(ob.label.clone()), part: Part::Center, position: ob.position_world });
            self.bound.insert(spot_sym.clone(), Binding { label: None, part: Part::Clearance, position: spot });
            out.push(removal_subtask(&sym, &spot_sym));
        }
        Ok(())
    }
}

/// Prepends pick-and-clear sub-tasks for objects standing between the robot and a
/// sub-task's targets. Objects already moved by earlier sub-tasks are not considered.
pub fn inject_obstacle_removal(plan: &mut Plan, world: &WorldModel) -> Result<(), PlannerError> {
    let mut c = Clearing { world, moved: BTreeSet::new(), slot: 0, bound: BTreeMap::new() };
    let mut out = Vec::with_capacity(plan.subtasks.len());
    for st in std::mem::take(&mut plan.subtasks) {
        let exclude = referenced_labels(&st, plan);
        let targets: Vec<crate::geom::Vec3<f64>> = st
            .motions
            .iter()
            .filter(|m| m.kind.takes_position())
            .filter_map(|m| plan.bound_symbols.get(&m.arg))
            .filter(|b| b.part != Part::Clearance)
            .map(|b| b.position)
            .collect();
        for t in &targets {
            c.clear(t, &exclude, &mut out)?;
        }
        if let Some(l) = grasped_label(&st, plan) {
            c.moved.insert(l);
        }
        out.push(st);
    }
    plan.subtasks = out;
    plan.bound_symbols.append(&mut c.bound);
    if plan.subtasks.len() >= 2 {
        plan.horizon = Horizon::Long;
    }
    Ok(())
}
