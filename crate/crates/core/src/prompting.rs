//! Prompt rendering for the three extraction questions under the four
//! in-context settings.
//!
//! A rendered prompt is a sequence of blocks separated by one blank line:
//!
//! ```text
//! Considering the context of Business Process Management and process modelling and the following definitions:
//! Activity:
//! An activity is a unit of work ...
//!
//! Consider the following process:
//! <shot document>
//! Q: <question>
//! A: <answer>
//!
//! Consider the following process:
//! <target document>
//! Q: <question>
//! A:
//! ```
//!
//! The definitions block appears only in the `defs` settings, the shot blocks
//! only in the `2shots` settings. The target block always closes the prompt
//! and ends with the answer cue `"A: "`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusEntry, CorpusError, Document};
use crate::digest::sha256_hex;

pub const PREAMBLE: &str = "Considering the context of Business Process Management and process modelling and the following definitions:";
pub const PROCESS_CUE: &str = "Consider the following process:";
pub const ANSWER_CUE: &str = "A: ";

const Q1_TEMPLATE: &str = "Lists the activities of the process";
const Q2_TEMPLATE: &str = "Who is the participant performing activity X in the process model?";
const Q3_TEMPLATE: &str = "Considering the list of process activity described in the text, does activity X immediately follow activity Y in the process model?";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("question {question} requires binding {placeholder}")]
    MissingBinding { question: QuestionKind, placeholder: char },
    #[error("unknown question kind {0:?}")]
    UnknownQuestion(String),
    #[error("unknown setting {0:?}")]
    UnknownSetting(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    Q1,
    Q2,
    Q3,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 3] = [QuestionKind::Q1, QuestionKind::Q2, QuestionKind::Q3];

    pub fn template(self) -> &'static str {
        match self {
            QuestionKind::Q1 => Q1_TEMPLATE,
            QuestionKind::Q2 => Q2_TEMPLATE,
            QuestionKind::Q3 => Q3_TEMPLATE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::Q1 => "q1",
            QuestionKind::Q2 => "q2",
            QuestionKind::Q3 => "q3",
        }
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(QuestionKind::Q1),
            "q2" => Ok(QuestionKind::Q2),
            "q3" => Ok(QuestionKind::Q3),
            _ => Err(PromptError::UnknownQuestion(s.to_string())),
        }
    }
}

/// In-context customization applied to a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "defs")]
    Defs,
    #[serde(rename = "2shots")]
    Shots2,
    #[serde(rename = "defs+2shots")]
    DefsShots2,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::Raw, Setting::Defs, Setting::Shots2, Setting::DefsShots2];

    pub fn has_definitions(self) -> bool {
        matches!(self, Setting::Defs | Setting::DefsShots2)
    }

    pub fn has_shots(self) -> bool {
        matches!(self, Setting::Shots2 | Setting::DefsShots2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Raw => "raw",
            Setting::Defs => "defs",
            Setting::Shots2 => "2shots",
            Setting::DefsShots2 => "defs+2shots",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Setting::Raw => "RAW",
            Setting::Defs => "DEFS",
            Setting::Shots2 => "2SHOTS",
            Setting::DefsShots2 => "DEFS+2SHOTS",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "+").as_str() {
            "raw" => Ok(Setting::Raw),
            "defs" => Ok(Setting::Defs),
            "2shots" | "shots2" | "shots" => Ok(Setting::Shots2),
            "defs+2shots" | "defs+shots2" | "defs+shots" | "defsshots2" => Ok(Setting::DefsShots2),
            _ => Err(PromptError::UnknownSetting(s.to_string())),
        }
    }
}

/// A contextual definition and the questions it is shown for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Definition {
    pub name: &'static str,
    pub text: &'static str,
    pub applies_to: &'static [QuestionKind],
}

impl Definition {
    pub fn applies(&self, question: QuestionKind) -> bool {
        self.applies_to.contains(&question)
    }
}

pub const DEFINITIONS: [Definition; 5] = [
    Definition {
        name: "Activity",
        text: "An activity is a unit of work that can be performed by an individual or a group. It is a specific step in the process.",
        applies_to: &[QuestionKind::Q1, QuestionKind::Q2, QuestionKind::Q3],
    },
    Definition {
        name: "Participant",
        text: "A participant is any individual or entity that participates in a business process. This could include individuals who initiate the process, those who respond to it, or those who are affected by it.",
        applies_to: &[QuestionKind::Q2],
    },
    Definition {
        name: "Process Model",
        text: "A process model is a model of a process in terms of process activities and their sequence flow relations.",
        applies_to: &[QuestionKind::Q3],
    },
    Definition {
        name: "Flow",
        text: "A flow object captures the execution flow among the process activities. It is a directional connector between activities in a Process. It defines the activities’ execution order.",
        applies_to: &[QuestionKind::Q3],
    },
    Definition {
        name: "Sequence Flow",
        text: "A Sequence Flow object defines a fixed sequential relation between two activities. Each Flow has only one source and only one target. The direction of the flow (from source to target) determines the execution order between two Activities. A sequence relation is an ordered temporal relation between a source activity and the activity that immediately follow it in the process model.",
        applies_to: &[QuestionKind::Q3],
    },
];

/// Reading of a "yes" to "does activity X immediately follow activity Y".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowsReading {
    /// X occurs after Y: the edge is `Y -> X`.
    XAfterY,
    /// X occurs before Y: the edge is `X -> Y`.
    XBeforeY,
}

impl FollowsReading {
    /// The follows edge `(source, target)` implied by a "yes" for bindings
    /// `X = activities[x]`, `Y = activities[y]`.
    pub fn edge(self, x: usize, y: usize) -> (usize, usize) {
        match self {
            FollowsReading::XAfterY => (y, x),
            FollowsReading::XBeforeY => (x, y),
        }
    }
}

/// The single place where the Q3 orientation is fixed.
pub const Q3_READING: FollowsReading = FollowsReading::XAfterY;

/// Ordered pairs `(x, y)` of distinct indices below `n` in lexicographic
/// order. Each pair is one Q3 query with `X = x`, `Y = y`.
pub fn q3_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
}

/// Values for the `X` and `Y` placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
}

impl Bindings {
    pub fn none() -> Self {
        Bindings::default()
    }

    pub fn x(x: impl Into<String>) -> Self {
        Bindings {
            x: Some(x.into()),
            y: None,
        }
    }

    pub fn xy(x: impl Into<String>, y: impl Into<String>) -> Self {
        Bindings {
            x: Some(x.into()),
            y: Some(y.into()),
        }
    }
}

/// Fills the question template. Q2 needs `X`, Q3 needs `X` and `Y`.
pub fn instantiate(question: QuestionKind, bindings: &Bindings) -> Result<String, PromptError> {
    let need = |placeholder: char, value: Option<&'_ String>| {
        value
            .cloned()
            .ok_or(PromptError::MissingBinding { question, placeholder })
    };
    Ok(match question {
        QuestionKind::Q1 => Q1_TEMPLATE.to_string(),
        QuestionKind::Q2 => {
            let x = need('X', bindings.x.as_ref())?;
            format!("Who is the participant performing activity {x} in the process model?")
        }
        QuestionKind::Q3 => {
            let x = need('X', bindings.x.as_ref())?;
            let y = need('Y', bindings.y.as_ref())?;
            format!(
                "Considering the list of process activity described in the text, does activity {x} immediately follow activity {y} in the process model?"
            )
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn as_str(self) -> &'static str {
        match self {
            YesNo::Yes => "Yes",
            YesNo::No => "No",
        }
    }
}

/// A worked example document with gold answers for every question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotExample {
    pub document: Document,
    /// Gold activities in document order.
    pub activities: Vec<String>,
    /// Per activity, its performers; activities without performers are not asked.
    pub performers: Vec<(String, Vec<String>)>,
    /// Per Q3 pair `(X, Y)` in [`q3_pairs`] order, the gold answer.
    pub follows: Vec<(String, String, YesNo)>,
}

impl ShotExample {
    pub fn from_entry(entry: &CorpusEntry) -> Self {
        let gold = &entry.gold;
        let activities: Vec<String> = gold.activities.iter().map(|a| a.surface.clone()).collect();
        let performers = activities
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let who: Vec<String> = gold.performers_of(i).into_iter().map(str::to_string).collect();
                (!who.is_empty()).then(|| (a.clone(), who))
            })
            .collect();
        let follows = q3_pairs(activities.len())
            .map(|(x, y)| {
                let answer = if gold.follows.contains(&Q3_READING.edge(x, y)) {
                    YesNo::Yes
                } else {
                    YesNo::No
                };
                (activities[x].clone(), activities[y].clone(), answer)
            })
            .collect();
        ShotExample {
            document: entry.document.clone(),
            activities,
            performers,
            follows,
        }
    }

    /// Question/answer lines for `question`, in asking order.
    fn exchanges(&self, question: QuestionKind) -> Vec<(String, String)> {
        let q = |b: &Bindings| instantiate(question, b).expect("shot bindings are complete");
        match question {
            QuestionKind::Q1 => vec![(q(&Bindings::none()), self.activities.join(", "))],
            QuestionKind::Q2 => self
                .performers
                .iter()
                .map(|(act, who)| (q(&Bindings::x(act)), who.join(" and ")))
                .collect(),
            QuestionKind::Q3 => self
                .follows
                .iter()
                .map(|(x, y, ans)| (q(&Bindings::xy(x, y)), ans.as_str().to_string()))
                .collect(),
        }
    }
}

/// A fully rendered completion-model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub question: QuestionKind,
    pub setting: Setting,
    pub doc_id: String,
    pub bindings: Bindings,
    /// SHA-256 of `text`.
    pub digest: String,
}

/// Renders prompts against a fixed pair of shot examples.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    shots: Vec<ShotExample>,
}

impl PromptBuilder {
    pub fn new(shots: Vec<ShotExample>) -> Self {
        PromptBuilder { shots }
    }

    /// Shots taken from the bundled documents "2.2" and "10.9".
    pub fn bundled() -> Self {
        Self::from_corpus(&Corpus::bundled()).expect("bundled corpus carries the shot documents")
    }

    pub fn from_corpus(corpus: &Corpus) -> Result<Self, CorpusError> {
        let shots = corpus.shot_documents()?;
        Ok(PromptBuilder::new(shots.iter().map(|e| ShotExample::from_entry(e)).collect()))
    }

    pub fn shots(&self) -> &[ShotExample] {
        &self.shots
    }

    /// The definitions block for `question`.
    pub fn definitions_block(question: QuestionKind) -> String {
        let mut lines = vec![PREAMBLE.to_string()];
        for def in DEFINITIONS.iter().filter(|d| d.applies(question)) {
            lines.push(format!("{}:", def.name));
            lines.push(def.text.to_string());
        }
        lines.join("\n")
    }

    /// All shot blocks for `question`, separated by blank lines.
    pub fn shots_block(&self, question: QuestionKind) -> String {
        self.shots
            .iter()
            .map(|shot| {
                let mut lines = vec![PROCESS_CUE.to_string(), shot.document.body.clone()];
                for (q, a) in shot.exchanges(question) {
                    lines.push(format!("Q: {q}"));
                    lines.push(format!("{ANSWER_CUE}{a}"));
                }
                lines.join("\n")
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn target_block(question: QuestionKind, doc: &Document, bindings: &Bindings) -> Result<String, PromptError> {
        let q = instantiate(question, bindings)?;
        Ok(format!("{PROCESS_CUE}\n{}\nQ: {q}\n{ANSWER_CUE}", doc.body))
    }

    pub fn render(
        &self,
        question: QuestionKind,
        setting: Setting,
        doc: &Document,
        bindings: &Bindings,
    ) -> Result<Prompt, PromptError> {
        let target = Self::target_block(question, doc, bindings)?;
        let mut blocks = Vec::with_capacity(3);
        if setting.has_definitions() {
            blocks.push(Self::definitions_block(question));
        }
        if setting.has_shots() && !self.shots.is_empty() {
            blocks.push(self.shots_block(question));
        }
        blocks.push(target);
        let text = blocks.join("\n\n");
        Ok(Prompt {
            digest: sha256_hex(&text),
            text,
            question,
            setting,
            doc_id: doc.id.clone(),
            bindings: bindings.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> Document {
        Document::new("t", "The clerk files the form.").unwrap()
    }

    #[test]
    fn instantiate_substitutes_verbatim() {
        assert_eq!(
            instantiate(QuestionKind::Q2, &Bindings::x("send invoice")).unwrap(),
            "Who is the participant performing activity send invoice in the process model?"
        );
        let q3 = instantiate(QuestionKind::Q3, &Bindings::xy("pay bill", "send invoice")).unwrap();
        let (px, py) = (q3.find("pay bill").unwrap(), q3.find("send invoice").unwrap());
        assert!(px < py);
        assert_eq!(instantiate(QuestionKind::Q1, &Bindings::none()).unwrap(), Q1_TEMPLATE);
    }

    #[test]
    fn instantiate_requires_bindings() {
        assert_eq!(
            instantiate(QuestionKind::Q2, &Bindings::none()),
            Err(PromptError::MissingBinding { question: QuestionKind::Q2, placeholder: 'X' })
        );
        assert_eq!(
            instantiate(QuestionKind::Q3, &Bindings::x("a")),
            Err(PromptError::MissingBinding { question: QuestionKind::Q3, placeholder: 'Y' })
        );
    }

    #[test]
    fn templates_match_question_wording() {
        for q in QuestionKind::ALL {
            let b = Bindings::xy("X", "Y");
            assert_eq!(instantiate(q, &b).unwrap(), q.template());
        }
    }

    #[test]
    fn raw_has_only_target() {
        let p = PromptBuilder::bundled()
            .render(QuestionKind::Q1, Setting::Raw, &doc(), &Bindings::none())
            .unwrap();
        assert!(!p.text.contains(PREAMBLE));
        assert_eq!(p.text.matches(PROCESS_CUE).count(), 1);
        assert!(p.text.ends_with("\nA: "));
        assert_eq!(p.digest, sha256_hex(&p.text));
    }

    #[test]
    fn defs_filtered_by_question() {
        let b = PromptBuilder::bundled();
        let q1 = b.render(QuestionKind::Q1, Setting::Defs, &doc(), &Bindings::none()).unwrap().text;
        assert!(q1.contains("Activity:\n"));
        assert!(!q1.contains("Participant:\n") && !q1.contains("Flow:\n"));
        assert_eq!(q1.matches(PREAMBLE).count(), 1);
    }

    #[test]
    fn shots_precede_target() {
        let p = PromptBuilder::bundled()
            .render(QuestionKind::Q1, Setting::Shots2, &doc(), &Bindings::none())
            .unwrap();
        assert_eq!(p.text.matches(PROCESS_CUE).count(), 3);
        assert!(p.text.ends_with(&PromptBuilder::target_block(QuestionKind::Q1, &doc(), &Bindings::none()).unwrap()));
    }

    #[test]
    fn q3_pairs_are_lexicographic() {
        assert_eq!(q3_pairs(3).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
        assert_eq!(q3_pairs(0).count(), 0);
        assert_eq!(q3_pairs(1).count(), 0);
    }

    #[test]
    fn settings_parse() {
        assert_eq!("defs+2shots".parse::<Setting>().unwrap(), Setting::DefsShots2);
        assert_eq!("DEFS_SHOTS2".parse::<Setting>().unwrap(), Setting::DefsShots2);
        assert_eq!("2SHOTS".parse::<Setting>().unwrap(), Setting::Shots2);
        assert!("fancy".parse::<Setting>().is_err());
        for s in Setting::ALL {
            assert_eq!(s.as_str().parse::<Setting>().unwrap(), s);
        }
        assert!("q4".parse::<QuestionKind>().is_err());
    }
}
