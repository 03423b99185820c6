use std::collections::{BTreeSet, HashMap};

use super::{Backend, BackendError, CompletionParams};
use crate::corpus::{Corpus, GoldStandard};
use crate::prompting::{Prompt, QuestionKind, Q3_READING};
use crate::worldmodel::normalize_surface;

/// Answers every question from gold annotations.
///
/// Q1 lists the gold activities one per line, Q2 names the performers of
/// activity X joined by " and " (empty when none), Q3 answers "Yes" iff the
/// gold follows relation holds for the bindings.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    gold: HashMap<String, GoldStandard>,
    omitted: HashMap<String, BTreeSet<usize>>,
}

impl OracleBackend {
    pub fn new(corpus: &Corpus) -> Self {
        OracleBackend {
            gold: corpus
                .entries()
                .iter()
                .map(|e| (e.document.id.clone(), e.gold.clone()))
                .collect(),
            omitted: HashMap::new(),
        }
    }

    /// Leaves the given gold activities out of Q1 answers for `doc_id`.
    pub fn omit_activities(mut self, doc_id: &str, activities: impl IntoIterator<Item = usize>) -> Self {
        self.omitted.entry(doc_id.to_string()).or_default().extend(activities);
        self
    }

    fn activity_index(gold: &GoldStandard, surface: Option<&str>) -> Option<usize> {
        let key = normalize_surface(surface?);
        gold.activities.iter().position(|a| normalize_surface(&a.surface) == key)
    }
}

impl Backend for OracleBackend {
    fn complete(&self, prompt: &Prompt, _params: &CompletionParams) -> Result<String, BackendError> {
        let gold = self
            .gold
            .get(&prompt.doc_id)
            .ok_or_else(|| BackendError::UnknownDocument(prompt.doc_id.clone()))?;
        let x = Self::activity_index(gold, prompt.bindings.x.as_deref());
        Ok(match prompt.question {
            QuestionKind::Q1 => {
                let omitted = self.omitted.get(&prompt.doc_id);
                gold.activities
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !omitted.is_some_and(|o| o.contains(i)))
                    .map(|(_, a)| a.surface.as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            QuestionKind::Q2 => x.map(|x| gold.performers_of(x).join(" and ")).unwrap_or_default(),
            QuestionKind::Q3 => {
                let y = Self::activity_index(gold, prompt.bindings.y.as_deref());
                let yes = matches!((x, y), (Some(x), Some(y)) if gold.follows.contains(&Q3_READING.edge(x, y)));
                if yes { "Yes" } else { "No" }.to_string()
            }
        })
    }
}
