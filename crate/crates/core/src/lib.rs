//! Extraction of process models from natural-language process descriptions.
//!
//! A completion model is interviewed one question at a time: first the
//! activities of the process, then the participant performing each activity,
//! then whether one activity immediately follows another. Answers populate a
//! [`worldmodel::WorldModel`], which [`eval`] scores against gold annotations.
//!
//! Module map:
//!
//! * [`corpus`] documents, gold standards, directly-follows derivation and the bundled fixtures
//! * [`worldmodel`] the extracted intermediate representation and its exports
//! * [`prompting`] prompt rendering for every question and in-context setting
//! * [`backend`] completion backends (live HTTP, transcript replay, gold oracle)
//! * [`pipeline`] the question dialogue and answer parsing
//! * [`eval`] phrase matching, precision/recall/F1 and report tables
//! * [`cli`] the `pex` command-line front end

pub mod backend;
pub mod cli;
pub mod corpus;
pub mod digest;
pub mod eval;
pub mod fsutil;
pub mod pipeline;
pub mod prompting;
pub mod worldmodel;

pub use backend::{Backend, BackendError, CompletionParams, QuestionParams};
pub use corpus::{ActivityPhrase, Corpus, CorpusEntry, CorpusError, Document, GoldStandard};
pub use eval::{ElementScores, EvalReport, MatchConfig};
pub use pipeline::{ActivitySource, ExtractionRun, Extractor};
pub use prompting::{Prompt, PromptBuilder, QuestionKind, Setting};
pub use worldmodel::WorldModel;
