//! Scoring of extracted world models against gold standards.

mod matching;
mod report;
mod scores;

use thiserror::Error;

pub use matching::{
    align, jaccard, match_phrase, normalize, Alignment, MatchConfig, MatchKind, PhraseMatch, BUNDLED_ALIASES,
    DEFAULT_STOPWORDS,
};
pub use report::{
    fmt2, macro_average, render_table, round2, score_document, DocumentScores, ElementRow, EvalReport, TableLayout,
};
pub use scores::{
    activity_map, f1, score_elements, score_relation, score_relations, ElementScores, MetricTriple, RelationMode,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gs-mode evaluation of {doc_id} needs a model seeded with exactly the gold activities")]
    ModeMismatch { doc_id: String },
    #[error("model for document {model} evaluated against gold for {gold}")]
    DocumentMismatch { model: String, gold: String },
    #[error("macro average over no documents")]
    EmptyAverage,
    #[error("match configuration: {0}")]
    Config(String),
}
