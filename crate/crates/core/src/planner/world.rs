//! What the planner knows about the scene: labeled perceived objects plus per-class
//! geometry, and how plan symbols map onto them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::perception::LabeledObject;
use crate::scene::Scene;

pub const HOME_SYMBOL: &str = "init";
pub const CLEARANCE_SYMBOL: &str = "clearance";
/// Spacing between successive put-down spots in the clearance zone.
pub const CLEARANCE_PITCH: f64 = 0.12;

/// Which point of an object a symbol designates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    /// Centre of a graspable object.
    Center,
    /// Top surface of a support such as a plate.
    Surface,
    /// Door edge of an articulated object without a handle.
    Grip,
    Handle,
    Knob,
    Inside,
    Above,
    /// A put-down spot in the clearance zone.
    Clearance,
}

/// A plan symbol bound to a perceived reference position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub part: Part,
    /// Perceived object centre (or the spot itself for clearance).
    pub position: Vec3<f64>,
}

/// Class-level geometry known to the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub name: String,
    pub size: Vec3<f64>,
    pub graspable: bool,
    pub articulated: bool,
    pub has_handle: bool,
    pub has_cavity: bool,
    pub has_knob: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub objects: Vec<LabeledObject<f64>>,
    pub classes: BTreeMap<String, ClassModel>,
    pub robot_base: Vec3<f64>,
    pub clearance: Option<Vec3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhraseError {
    Unknown(String),
    /// Several objects of `class` match; candidates are their labels.
    Ambiguous {
        class: String,
        candidates: Vec<String>,
    },
}

const ORDINALS: [&str; 10] = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

/// Position words and ordinals that pick one member of a class. Returns the 1-based
/// index for a class of `count` members.
pub fn modifier_index(word: &str, count: usize) -> Option<usize> {
    let w = word.trim();
    if let Some(i) = ORDINALS.iter().position(|o| *o == w) {
        return Some(i + 1);
    }
    let digits: String = w.chars().take_while(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() && (w.len() == digits.len() || matches!(&w[digits.len()..], "st" | "nd" | "rd" | "th")) {
        return digits.parse().ok();
    }
    match w {
        "left" | "leftmost" => Some(1),
        "right" | "rightmost" | "last" => Some(count),
        "middle" | "center" | "centre" if count % 2 == 1 => Some(count / 2 + 1),
        _ => None,
    }
}

pub fn is_modifier(word: &str) -> bool {
    modifier_index(word, 3).is_some() || matches!(word, "middle" | "center" | "centre")
}

impl WorldModel {
    /// Builds a model from labeled objects, taking class geometry from the scene.
    pub fn new(scene: &Scene, objects: Vec<LabeledObject<f64>>) -> Self {
        let mut classes = BTreeMap::new();
        for o in &scene.objects {
            classes.entry(o.name.clone()).or_insert_with(|| ClassModel {
                name: o.name.clone(),
                size: o.size,
                graspable: o.graspable,
                articulated: o.articulation.is_some(),
                has_handle: o.articulation.as_ref().is_some_and(|a| a.has_handle),
                has_cavity: o.cavity.is_some(),
                has_knob: o.knob.is_some(),
            });
        }
        WorldModel { objects, classes, robot_base: scene.robot.base(), clearance: scene.clearance_zone }
    }

    pub fn ground_truth(scene: &Scene) -> Self {
        Self::new(scene, crate::perception::ground_truth(scene))
    }

    pub fn count(&self, class: &str) -> usize {
        self.objects.iter().filter(|o| o.name == class).count()
    }

    /// `(name, quantity)` in first-appearance order.
    pub fn inventory(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for o in &self.objects {
            match out.iter_mut().find(|(n, _)| *n == o.name) {
                Some(e) => e.1 += 1,
                None => out.push((o.name.clone(), 1)),
            }
        }
        out
    }

    pub fn by_label(&self, label: &str) -> Option<&LabeledObject<f64>> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn class(&self, name: &str) -> Option<&ClassModel> {
        self.classes.get(name)
    }

    /// Bare class name for a unique object, the label otherwise.
    pub fn symbol_for(&self, label: &str) -> Option<String> {
        let o = self.by_label(label)?;
        Some(if self.count(&o.name) == 1 { o.name.clone() } else { o.label.clone() })
    }

    /// Label of the object a symbol stem refers to (`apple`, `cup2`).
    pub fn label_for_stem(&self, stem: &str) -> Option<String> {
        if self.count(stem) == 1 {
            return self.objects.iter().find(|o| o.name == stem).map(|o| o.label.clone());
        }
        self.by_label(stem).map(|o| o.label.clone())
    }

    pub fn clearance_spot(&self, slot: usize) -> Option<Vec3<f64>> {
        self.clearance.map(|c| c + Vec3::new(0.0, -CLEARANCE_PITCH * slot as f64, 0.0))
    }

    pub fn clearance_symbol(slot: usize) -> String {
        if slot == 0 {
            CLEARANCE_SYMBOL.to_string()
        } else {
            format!("{CLEARANCE_SYMBOL}{}", slot + 1)
        }
    }

    /// Binds a positional symbol. `init` is not bound: it is resolved against the
    /// robot's base when executed.
    pub fn resolve_symbol(&self, symbol: &str) -> Option<Binding> {
        if let Some(rest) = symbol.strip_prefix(CLEARANCE_SYMBOL) {
            let slot = if rest.is_empty() { 0 } else { rest.parse::<usize>().ok()?.checked_sub(1)? };
            return Some(Binding { label: None, part: Part::Clearance, position: self.clearance_spot(slot)? });
        }
        let (stem, suffix_part) =
            [("_handle", Part::Handle), ("_knob", Part::Knob), ("_inside", Part::Inside), ("_above", Part::Above)]
                .iter()
                .find_map(|(suf, part)| symbol.strip_suffix(suf).map(|s| (s, Some(*part))))
                .unwrap_or((symbol, None));
        let label = self.label_for_stem(stem)?;
        let obj = self.by_label(&label)?;
        let class = self.class(&obj.name)?;
        let part = match suffix_part {
            Some(Part::Handle) if !class.has_handle => return None,
            Some(Part::Knob) if !class.has_knob => return None,
            Some(Part::Inside) if !class.has_cavity => return None,
            Some(p) => p,
            None if class.graspable => Part::Center,
            None if class.articulated && !class.has_handle => Part::Grip,
            None => Part::Surface,
        };
        Some(Binding { label: Some(label), part, position: obj.position_world })
    }

    /// Resolves a noun phrase such as `the apple`, `middle cup`, `second bottle` or
    /// `cup2` to a label.
    pub fn resolve_phrase(&self, phrase: &str) -> Result<String, PhraseError> {
        let words: Vec<&str> = phrase.split_whitespace().filter(|w| !matches!(*w, "the" | "a" | "an" | "one")).collect();
        let unknown = || PhraseError::Unknown(phrase.trim().to_string());
        match words.as_slice() {
            [single] => {
                if self.by_label(single).is_some() && self.count(single) == 0 {
                    return Ok(single.to_string());
                }
                let class = single.to_string();
                let members: Vec<String> = self.objects.iter().filter(|o| o.name == class).map(|o| o.label.clone()).collect();
                match members.len() {
                    0 => Err(unknown()),
                    1 => Ok(members[0].clone()),
                    _ => Err(PhraseError::Ambiguous { class, candidates: members }),
                }
            }
            [modifier, class] => {
                let count = self.count(class);
                if count == 0 {
                    return Err(unknown());
                }
                let idx = modifier_index(modifier, count).ok_or_else(unknown)?;
                self.objects
                    .iter()
                    .find(|o| o.name == *class && o.index_in_class == idx)
                    .map(|o| o.label.clone())
                    .ok_or_else(unknown)
            }
            _ => Err(unknown()),
        }
    }
}
