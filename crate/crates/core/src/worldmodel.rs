//! The extracted intermediate representation: activities, participants,
//! performs edges and directly-follows edges, each carrying the question and
//! prompt digest it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::QuestionKind;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("element surface is empty")]
    EmptySurface,
    #[error("{what} index {index} is out of range ({len} present)")]
    OutOfRange { what: &'static str, index: usize, len: usize },
    #[error("follows edge ({0},{0}) would be a self-loop")]
    SelfLoop(usize),
    #[error("duplicate {what} {surface:?} in model")]
    Duplicate { what: &'static str, surface: String },
    #[error("malformed model JSON: {0}")]
    Malformed(String),
}

/// Where an element came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Q1,
    Q2,
    Q3,
    /// Seeded from gold annotations instead of asked.
    Gold,
}

impl From<QuestionKind> for Origin {
    fn from(q: QuestionKind) -> Self {
        match q {
            QuestionKind::Q1 => Origin::Q1,
            QuestionKind::Q2 => Origin::Q2,
            QuestionKind::Q3 => Origin::Q3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    /// SHA-256 of the prompt text (or of the document body for gold seeds).
    pub digest: String,
}

impl Provenance {
    pub fn new(origin: Origin, digest: impl Into<String>) -> Self {
        Provenance {
            origin,
            digest: digest.into(),
        }
    }
}

/// Case-folds and collapses internal whitespace. Two surfaces denote the
/// same element iff their normalized forms are equal.
pub fn normalize_surface(surface: &str) -> String {
    surface
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub surface: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    doc_id: String,
    activities: Vec<Element>,
    participants: Vec<Element>,
    performs: Vec<Edge>,
    follows: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Canonical model JSON, re-importable with [`WorldModel::from_json`].
    Json,
    /// Graphviz digraph.
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldModel {
    doc_id: String,
    activities: Vec<Element>,
    participants: Vec<Element>,
    /// `(participant, activity)` -> provenance
    performs: BTreeMap<(usize, usize), Provenance>,
    /// `(source, target)` -> provenance
    follows: BTreeMap<(usize, usize), Provenance>,
}

impl WorldModel {
    pub fn new(doc_id: impl Into<String>) -> Self {
        WorldModel {
            doc_id: doc_id.into(),
            activities: Vec::new(),
            participants: Vec::new(),
            performs: BTreeMap::new(),
            follows: BTreeMap::new(),
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn activities(&self) -> impl ExactSizeIterator<Item = &str> {
        self.activities.iter().map(|e| e.surface.as_str())
    }

    pub fn participants(&self) -> impl ExactSizeIterator<Item = &str> {
        self.participants.iter().map(|e| e.surface.as_str())
    }

    pub fn activity_elements(&self) -> &[Element] {
        &self.activities
    }

    pub fn participant_elements(&self) -> &[Element] {
        &self.participants
    }

    pub fn activity_count(&self) -> usize {
        self.activities.len()
    }

    pub fn participant_count(&self) -> usize {
        self.participants.len()
    }

    pub fn activity(&self, index: usize) -> Option<&str> {
        self.activities.get(index).map(|e| e.surface.as_str())
    }

    pub fn performs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.performs.keys().copied()
    }

    pub fn follows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.follows.keys().copied()
    }

    pub fn follows_provenance(&self, edge: (usize, usize)) -> Option<&Provenance> {
        self.follows.get(&edge)
    }

    pub fn performs_provenance(&self, edge: (usize, usize)) -> Option<&Provenance> {
        self.performs.get(&edge)
    }

    fn add_element(
        list: &mut Vec<Element>,
        surface: &str,
        provenance: Provenance,
    ) -> Result<usize, ModelError> {
        let surface = surface.trim();
        if surface.is_empty() {
            return Err(ModelError::EmptySurface);
        }
        let key = normalize_surface(surface);
        if let Some(i) = list.iter().position(|e| normalize_surface(&e.surface) == key) {
            return Ok(i);
        }
        list.push(Element {
            surface: surface.to_string(),
            provenance,
        });
        Ok(list.len() - 1)
    }

    /// Adds an activity, or returns the index of an existing one with the
    /// same normalized surface. The first provenance is kept.
    pub fn add_activity(&mut self, surface: &str, provenance: Provenance) -> Result<usize, ModelError> {
        Self::add_element(&mut self.activities, surface, provenance)
    }

    pub fn add_participant(&mut self, surface: &str, provenance: Provenance) -> Result<usize, ModelError> {
        Self::add_element(&mut self.participants, surface, provenance)
    }

    fn check(&self, what: &'static str, index: usize, len: usize) -> Result<(), ModelError> {
        if index >= len {
            return Err(ModelError::OutOfRange { what, index, len });
        }
        Ok(())
    }

    pub fn add_performs(
        &mut self,
        participant: usize,
        activity: usize,
        provenance: Provenance,
    ) -> Result<(), ModelError> {
        self.check("participant", participant, self.participants.len())?;
        self.check("activity", activity, self.activities.len())?;
        self.performs.entry((participant, activity)).or_insert(provenance);
        Ok(())
    }

    /// Records that `target` directly follows `source`. Cycles are allowed.
    pub fn add_follows(&mut self, source: usize, target: usize, provenance: Provenance) -> Result<(), ModelError> {
        self.check("activity", source, self.activities.len())?;
        self.check("activity", target, self.activities.len())?;
        if source == target {
            return Err(ModelError::SelfLoop(source));
        }
        self.follows.entry((source, target)).or_insert(provenance);
        Ok(())
    }

    fn to_file(&self) -> ModelFile {
        let edges = |m: &BTreeMap<(usize, usize), Provenance>| {
            m.iter()
                .map(|(&(source, target), p)| Edge {
                    source,
                    target,
                    provenance: p.clone(),
                })
                .collect()
        };
        ModelFile {
            doc_id: self.doc_id.clone(),
            activities: self.activities.clone(),
            participants: self.participants.clone(),
            performs: edges(&self.performs),
            follows: edges(&self.follows),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("model serializes");
        s.push('\n');
        s
    }

    /// Parses and validates canonical model JSON.
    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(json).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let mut model = WorldModel::new(file.doc_id);
        for (what, elements, is_activity) in [
            ("activity", file.activities, true),
            ("participant", file.participants, false),
        ] {
            for el in elements {
                let before = if is_activity { model.activities.len() } else { model.participants.len() };
                let idx = if is_activity {
                    model.add_activity(&el.surface, el.provenance)?
                } else {
                    model.add_participant(&el.surface, el.provenance)?
                };
                if idx != before {
                    return Err(ModelError::Duplicate { what, surface: el.surface });
                }
            }
        }
        for e in file.performs {
            model.add_performs(e.source, e.target, e.provenance)?;
        }
        for e in file.follows {
            model.add_follows(e.source, e.target, e.provenance)?;
        }
        Ok(model)
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => self.to_json(),
            ExportFormat::Dot => self.to_dot(),
        }
    }

    fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", dot_quote(&self.doc_id));
        for (i, a) in self.activities.iter().enumerate() {
            let _ = writeln!(out, "  a{i} [label={}];", dot_quote(&a.surface));
        }
        for (i, p) in self.participants.iter().enumerate() {
            let _ = writeln!(out, "  p{i} [label={}, shape=box];", dot_quote(&p.surface));
        }
        for &(s, t) in self.follows.keys() {
            let _ = writeln!(out, "  a{s} -> a{t};");
        }
        for &(p, a) in self.performs.keys() {
            let _ = writeln!(out, "  p{p} -> a{a} [label=\"performs\", style=dashed];");
        }
        out.push_str("}\n");
        out
    }
}

fn dot_quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}
