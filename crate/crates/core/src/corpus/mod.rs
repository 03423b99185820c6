//! Process descriptions and their gold annotations.
//!
//! The canonical corpus file is a JSON list of records:
//!
//! ```json
//! [{"id": "10.1", "body": "...",
//!   "gold": {"activities": [{"surface": "receives the order", "index": 10}],
//!            "participants": ["clerk"],
//!            "performs": [[0, 0]],
//!            "follows": []}}]
//! ```
//!
//! `performs` pairs are `[participant, activity]` indices and `follows`
//! pairs are `[source, target]` activity indices. Every record is validated
//! on load.

mod follows;
mod import;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use follows::{derive_follows, NodeKind, RawBehaviorGraph};
pub use import::{import_raw_document, RawDocument, RawNode, RawParticipant};

/// Ids of the seven evaluation documents, in table order.
pub const EVALUATION_IDS: [&str; 7] = ["1.2", "1.3", "3.3", "5.2", "10.1", "10.6", "10.13"];

/// Ids of the documents used as in-context examples, in prompt order.
pub const SHOT_IDS: [&str; 2] = ["2.2", "10.9"];

const BUNDLED_CORPUS: &str = include_str!("../../fixtures/corpus.json");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus data: {0}")]
    Malformed(String),
    #[error("document {doc}: {message}")]
    Invariant { doc: String, message: String },
    #[error("document id {0} appears more than once")]
    DuplicateId(String),
    #[error("fixture document {0} is missing from the bundled corpus")]
    MissingFixture(String),
}

impl CorpusError {
    fn invariant(doc: &str, message: impl Into<String>) -> Self {
        CorpusError::Invariant {
            doc: doc.to_string(),
            message: message.into(),
        }
    }
}

/// One textual process description, stored verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub body: String,
    pub word_count: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let body = body.into();
        if id.trim().is_empty() {
            return Err(CorpusError::Malformed("document id is empty".into()));
        }
        if body.trim().is_empty() {
            return Err(CorpusError::invariant(&id, "body is empty"));
        }
        let word_count = body.split_whitespace().count();
        Ok(Document {
            id,
            body,
            word_count,
        })
    }
}

/// A gold activity: verb and activity data joined by a single space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPhrase {
    pub surface: String,
    /// Byte offset of the verb's first occurrence in the document body.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldStandard {
    pub doc_id: String,
    pub activities: Vec<ActivityPhrase>,
    pub participants: Vec<String>,
    /// `(participant, activity)` index pairs.
    pub performs: BTreeSet<(usize, usize)>,
    /// `(source, target)` activity index pairs; the source precedes the target.
    pub follows: BTreeSet<(usize, usize)>,
}

impl GoldStandard {
    pub fn activity_surfaces(&self) -> Vec<&str> {
        self.activities.iter().map(|a| a.surface.as_str()).collect()
    }

    /// Participants annotated as performing activity `activity`.
    pub fn performers_of(&self, activity: usize) -> Vec<&str> {
        self.performs
            .iter()
            .filter(|(_, a)| *a == activity)
            .map(|(p, _)| self.participants[*p].as_str())
            .collect()
    }

    fn validate(&self, body: &str) -> Result<(), CorpusError> {
        let doc = self.doc_id.as_str();
        for (i, act) in self.activities.iter().enumerate() {
            if act.surface.trim().is_empty() {
                return Err(CorpusError::invariant(doc, format!("activity {i} has an empty surface")));
            }
            if act.index >= body.len() || !body.is_char_boundary(act.index) {
                return Err(CorpusError::invariant(
                    doc,
                    format!("activity {i} offset {} is outside the body", act.index),
                ));
            }
        }
        for (i, p) in self.participants.iter().enumerate() {
            if p.trim().is_empty() {
                return Err(CorpusError::invariant(doc, format!("participant {i} is empty")));
            }
        }
        let n_act = self.activities.len();
        let n_part = self.participants.len();
        for &(p, a) in &self.performs {
            if p >= n_part || a >= n_act {
                return Err(CorpusError::invariant(
                    doc,
                    format!("performs pair ({p},{a}) references an unknown element"),
                ));
            }
        }
        for &(a, b) in &self.follows {
            if a >= n_act || b >= n_act {
                return Err(CorpusError::invariant(
                    doc,
                    format!("follows pair ({a},{b}) references an unknown activity"),
                ));
            }
            if a == b {
                return Err(CorpusError::invariant(
                    doc,
                    format!("follows pair ({a},{b}) is reflexive"),
                ));
            }
        }
        Ok(())
    }
}

/// A validated document with its gold standard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub document: Document,
    pub gold: GoldStandard,
}

/// Serialized form of one corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub body: String,
    pub gold: GoldRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub activities: Vec<ActivityPhrase>,
    pub participants: Vec<String>,
    pub performs: Vec<[usize; 2]>,
    pub follows: Vec<[usize; 2]>,
}

fn pair_set(doc: &str, what: &str, pairs: &[[usize; 2]]) -> Result<BTreeSet<(usize, usize)>, CorpusError> {
    let mut set = BTreeSet::new();
    for &[a, b] in pairs {
        if !set.insert((a, b)) {
            return Err(CorpusError::invariant(doc, format!("duplicate {what} pair ({a},{b})")));
        }
    }
    Ok(set)
}

impl CorpusRecord {
    pub fn into_entry(self) -> Result<CorpusEntry, CorpusError> {
        let document = Document::new(self.id, self.body)?;
        let id = document.id.clone();
        let gold = GoldStandard {
            performs: pair_set(&id, "performs", &self.gold.performs)?,
            follows: pair_set(&id, "follows", &self.gold.follows)?,
            doc_id: id,
            activities: self.gold.activities,
            participants: self.gold.participants,
        };
        gold.validate(&document.body)?;
        Ok(CorpusEntry { document, gold })
    }

    pub fn from_entry(entry: &CorpusEntry) -> Self {
        CorpusRecord {
            id: entry.document.id.clone(),
            body: entry.document.body.clone(),
            gold: GoldRecord {
                activities: entry.gold.activities.clone(),
                participants: entry.gold.participants.clone(),
                performs: entry.gold.performs.iter().map(|&(p, a)| [p, a]).collect(),
                follows: entry.gold.follows.iter().map(|&(a, b)| [a, b]).collect(),
            },
        }
    }
}

/// An ordered, validated collection of corpus entries with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.document.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.document.id.clone()));
            }
        }
        Ok(Corpus { entries })
    }

    /// Parses canonical corpus JSON. Whitespace-only input is an empty corpus.
    pub fn from_json_str(json: &str) -> Result<Self, CorpusError> {
        if json.trim().is_empty() {
            return Ok(Corpus::default());
        }
        let records: Vec<CorpusRecord> =
            serde_json::from_str(json).map_err(|e| CorpusError::Malformed(e.to_string()))?;
        let entries = records
            .into_iter()
            .map(CorpusRecord::into_entry)
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::from_entries(entries)
    }

    /// The nine documents shipped with the crate: the seven evaluation
    /// documents followed by the two shot documents.
    pub fn bundled() -> Self {
        Corpus::from_json_str(BUNDLED_CORPUS).expect("bundled corpus fixture is valid")
    }

    pub fn to_json_string(&self) -> String {
        let records: Vec<CorpusRecord> = self.entries.iter().map(CorpusRecord::from_entry).collect();
        serde_json::to_string_pretty(&records).expect("corpus records serialize")
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.document.id == id)
    }

    /// The shot documents "2.2" and "10.9", in prompt order.
    pub fn shot_documents(&self) -> Result<[&CorpusEntry; 2], CorpusError> {
        let find = |id: &str| self.get(id).ok_or_else(|| CorpusError::MissingFixture(id.to_string()));
        Ok([find(SHOT_IDS[0])?, find(SHOT_IDS[1])?])
    }

    /// Entries eligible for evaluation: the table documents present in this
    /// corpus, or every non-shot document when none of them is present.
    pub fn evaluation_entries(&self) -> Vec<&CorpusEntry> {
        let table: Vec<_> = EVALUATION_IDS.iter().filter_map(|id| self.get(id)).collect();
        if !table.is_empty() {
            return table;
        }
        self.entries
            .iter()
            .filter(|e| !SHOT_IDS.contains(&e.document.id.as_str()))
            .collect()
    }
}

/// Loads and validates a canonical corpus file.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Corpus::from_json_str(&text)
}

/// The two bundled shot documents with their gold standards.
pub fn shot_documents() -> Result<[CorpusEntry; 2], CorpusError> {
    let corpus = Corpus::bundled();
    let [a, b] = corpus.shot_documents()?;
    Ok([a.clone(), b.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(follows: &str) -> String {
        format!(
            r#"[{{"id":"x","body":"A clerk files it and signs it.",
                "gold":{{"activities":[{{"surface":"files it","index":8}},{{"surface":"signs it","index":21}}],
                        "participants":["clerk"],"performs":[[0,0]],"follows":{follows}}}}}]"#
        )
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(Corpus::from_json_str("").unwrap().is_empty());
        assert!(Corpus::from_json_str("[]").unwrap().is_empty());
    }

    #[test]
    fn reflexive_follows_rejected() {
        let err = Corpus::from_json_str(&record("[[0,0]]")).unwrap_err();
        match err {
            CorpusError::Invariant { doc, message } => {
                assert_eq!(doc, "x");
                assert!(message.contains("reflexive"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_activity_rejected() {
        let err = Corpus::from_json_str(&record("[[0,5]]")).unwrap_err();
        assert!(matches!(err, CorpusError::Invariant { .. }));
    }

    #[test]
    fn duplicate_pair_rejected() {
        let err = Corpus::from_json_str(&record("[[0,1],[0,1]]")).unwrap_err();
        assert!(err.to_string().contains("duplicate follows"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let one = record("[]");
        let inner = one.trim().trim_start_matches('[').trim_end_matches(']');
        let two = format!("[{inner},{inner}]");
        assert!(matches!(
            Corpus::from_json_str(&two).unwrap_err(),
            CorpusError::DuplicateId(id) if id == "x"
        ));
    }

    #[test]
    fn malformed_record_rejected() {
        assert!(matches!(
            Corpus::from_json_str(r#"[{"id":"x"}]"#).unwrap_err(),
            CorpusError::Malformed(_)
        ));
    }

    #[test]
    fn empty_body_rejected() {
        let json = r#"[{"id":"x","body":"  ","gold":{"activities":[],"participants":[],"performs":[],"follows":[]}}]"#;
        assert!(matches!(Corpus::from_json_str(json).unwrap_err(), CorpusError::Invariant { .. }));
    }

    #[test]
    fn word_count_is_whitespace_tokens() {
        let d = Document::new("d", "  one two\tthree\nfour ").unwrap();
        assert_eq!(d.word_count, 4);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_corpus(Path::new("/nonexistent/corpus.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/corpus.json"));
    }

    #[test]
    fn json_round_trip() {
        let corpus = Corpus::bundled();
        let again = Corpus::from_json_str(&corpus.to_json_string()).unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn shot_documents_are_bundled() {
        let [a, b] = shot_documents().unwrap();
        assert_eq!(a.document.id, "2.2");
        assert_eq!(b.document.id, "10.9");
        for id in SHOT_IDS {
            assert!(!EVALUATION_IDS.contains(&id));
        }
    }
}
