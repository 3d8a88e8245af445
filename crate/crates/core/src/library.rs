//! Persistent store of demonstrated skills.
//!
//! Directory layout:
//!
//! ```text
//! <dir>/library.json            index: [{name, file, created_at, version}] per movement primitive
//! <dir>/<dmp>.dmp.json          one learned primitive
//! <dir>/<skill>.skill.json      sub-task record: stored motions, replaced motions, source recording
//! <dir>/archive/                superseded versions, never rewritten
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{DmpDocument, DmpError, DmpModel};
use crate::geom::Vec3;
use crate::motion::MotionFunction;

pub const INDEX_FILE: &str = "library.json";
pub const ARCHIVE_DIR: &str = "archive";

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("skill `{0}` already exists; confirm replacement to overwrite")]
    Duplicate(String),
    #[error("primitive `{0}` belongs to skill `{1}`")]
    ForeignPrimitive(String, String),
    #[error("invalid skill name `{0}`")]
    BadName(String),
    #[error("library io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("library file {path} is malformed: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("primitive document {0}: {1}")]
    Document(String, DmpError),
}

/// Object a skill was demonstrated against; replays shift the primitive goals by how
/// far the perceived object is from where it was during the demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub symbol: String,
    pub position: Vec3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub name: String,
    /// Sequence emitted in place of the basic one.
    pub motions: Vec<MotionFunction>,
    /// Basic-library sequence the skill replaced, kept for audit.
    pub replaced_motions: Vec<MotionFunction>,
    /// Recording the primitives were fitted from.
    pub created_from: String,
    pub dmp_names: Vec<String>,
    #[serde(default)]
    pub anchor: Option<Anchor>,
    pub created_at: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub file: String,
    pub created_at: String,
    pub version: u32,
}

#[derive(Debug, Clone)]
struct StoredDmp {
    model: DmpModel<f64>,
    entry: IndexEntry,
    owner: String,
}

pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

pub fn fixed_clock(stamp: &str) -> Clock {
    let s = stamp.to_string();
    Arc::new(move || s.clone())
}

/// Skill and primitive store, optionally mirrored to a directory.
#[derive(Clone)]
pub struct SkillLibrary {
    dir: Option<PathBuf>,
    dmps: BTreeMap<String, StoredDmp>,
    skills: BTreeMap<String, SkillRecord>,
    clock: Clock,
}

impl std::fmt::Debug for SkillLibrary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SkillLibrary")
            .field("dir", &self.dir)
            .field("skills", &self.skills.keys().collect::<Vec<_>>())
            .field("dmps", &self.dmps.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for SkillLibrary {
    fn default() -> Self {
        Self::in_memory()
    }
}

/// A primitive to store with a skill.
pub struct NewPrimitive {
    pub name: String,
    pub model: DmpModel<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LibraryError + '_ {
    move |source| LibraryError::Io { path: path.display().to_string(), source }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LibraryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| LibraryError::Json { path: path.display().to_string(), source })
}

/// Writes through a temporary file so readers never see half a document.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LibraryError> {
    let mut text = serde_json::to_string_pretty(value).expect("library values serialize");
    text.push('\n');
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl SkillLibrary {
    pub fn in_memory() -> Self {
        SkillLibrary { dir: None, dmps: BTreeMap::new(), skills: BTreeMap::new(), clock: system_clock() }
    }

    /// Opens (creating if needed) a library directory and loads everything in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LibraryError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut lib = SkillLibrary { dir: Some(dir.clone()), ..Self::in_memory() };
        let mut skill_files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".skill.json"))
            .collect();
        skill_files.sort();
        for path in skill_files {
            let rec: SkillRecord = read_json(&path)?;
            lib.skills.insert(rec.name.clone(), rec);
        }
        let index_path = dir.join(INDEX_FILE);
        let index: Vec<IndexEntry> = if index_path.exists() { read_json(&index_path)? } else { Vec::new() };
        for entry in index {
            let path = dir.join(&entry.file);
            let doc: DmpDocument = read_json(&path)?;
            let model = DmpModel::from_document(&doc).map_err(|e| LibraryError::Document(entry.file.clone(), e))?;
            let owner = lib
                .skills
                .values()
                .find(|s| s.dmp_names.contains(&entry.name))
                .map(|s| s.name.clone())
                .unwrap_or_else(|| entry.name.clone());
            lib.dmps.insert(entry.name.clone(), StoredDmp { model, entry, owner });
        }
        Ok(lib)
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn skill(&self, name: &str) -> Option<&SkillRecord> {
        self.skills.get(name)
    }

    pub fn skills(&self) -> impl Iterator<Item = &SkillRecord> {
        self.skills.values()
    }

    pub fn dmp(&self, name: &str) -> Option<&DmpModel<f64>> {
        self.dmps.get(name).map(|d| &d.model)
    }

    /// Skill that published the primitive `dmp_name`.
    pub fn owner_of(&self, dmp_name: &str) -> Option<&SkillRecord> {
        self.dmps.get(dmp_name).and_then(|d| self.skills.get(&d.owner))
    }

    pub fn index(&self) -> Vec<IndexEntry> {
        self.dmps.values().map(|d| d.entry.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty() && self.dmps.is_empty()
    }

    pub fn now(&self) -> String {
        (self.clock)()
    }

    /// Stores a skill with its primitives. An existing skill of the same name is only
    /// replaced when `replace` is set; its files move to the archive first.
    #[allow(clippy::too_many_arguments)]
    pub fn commit(
        &mut self,
        name: &str,
        motions: Vec<MotionFunction>,
        replaced_motions: Vec<MotionFunction>,
        created_from: &str,
        primitives: Vec<NewPrimitive>,
        anchor: Option<Anchor>,
        replace: bool,
    ) -> Result<SkillRecord, LibraryError> {
        if !valid_name(name) {
            return Err(LibraryError::BadName(name.to_string()));
        }
        for p in &primitives {
            if !valid_name(&p.name) {
                return Err(LibraryError::BadName(p.name.clone()));
            }
            if let Some(existing) = self.dmps.get(&p.name) {
                if existing.owner != name {
                    return Err(LibraryError::ForeignPrimitive(p.name.clone(), existing.owner.clone()));
                }
            }
        }
        let previous = self.skills.get(name).cloned();
        if previous.is_some() && !replace {
            return Err(LibraryError::Duplicate(name.to_string()));
        }
        let version = previous.as_ref().map_or(1, |p| p.version + 1);
        if let Some(prev) = &previous {
            self.archive(prev)?;
        }
        let created_at = self.now();
        let record = SkillRecord {
            name: name.to_string(),
            motions,
            replaced_motions,
            created_from: created_from.to_string(),
            dmp_names: primitives.iter().map(|p| p.name.clone()).collect(),
            anchor,
            created_at: created_at.clone(),
            version,
        };
        for p in primitives {
            let entry = IndexEntry {
                name: p.name.clone(),
                file: format!("{}.dmp.json", p.name),
                created_at: created_at.clone(),
                version,
            };
            if let Some(dir) = &self.dir {
                write_json(&dir.join(&entry.file), &p.model.to_document(&p.name, &created_at))?;
            }
            self.dmps.insert(p.name.clone(), StoredDmp { model: p.model, entry, owner: name.to_string() });
        }
        if let Some(dir) = &self.dir {
            write_json(&dir.join(format!("{name}.skill.json")), &record)?;
            write_json(&dir.join(INDEX_FILE), &self.index())?;
        }
        self.skills.insert(name.to_string(), record.clone());
        Ok(record)
    }

    fn archive(&mut self, prev: &SkillRecord) -> Result<(), LibraryError> {
        let mut files: Vec<String> = prev.dmp_names.iter().map(|d| format!("{d}.dmp.json")).collect();
        files.push(format!("{}.skill.json", prev.name));
        for d in &prev.dmp_names {
            self.dmps.remove(d);
        }
        if let Some(dir) = &self.dir {
            let archive = dir.join(ARCHIVE_DIR);
            fs::create_dir_all(&archive).map_err(io_err(&archive))?;
            for f in files {
                let from = dir.join(&f);
                if from.exists() {
                    let to = archive.join(format!("v{}.{f}", prev.version));
                    fs::rename(&from, &to).map_err(io_err(&to))?;
                }
            }
            write_json(&dir.join(INDEX_FILE), &self.index())?;
        }
        Ok(())
    }
}
