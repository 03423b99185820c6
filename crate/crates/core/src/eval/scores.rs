use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::matching::{align, Alignment, MatchConfig};
use super::EvalError;
use crate::corpus::GoldStandard;
use crate::worldmodel::{normalize_surface, WorldModel};

/// Precision, recall and F1 at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricTriple {
    /// Completes `(precision, recall)` with their harmonic mean.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        MetricTriple {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// `2PR / (P + R)`, or 0 when `P + R = 0`.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ElementScores {
    /// Scores `tp` correct items out of `predicted` predictions and `gold`
    /// gold items. Both sides empty scores 1; an empty side otherwise
    /// scores 0.
    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        assert!(tp <= predicted && tp <= gold, "tp {tp} exceeds predicted {predicted} or gold {gold}");
        let ratio = |den: usize| {
            if predicted == 0 && gold == 0 {
                1.0
            } else if den == 0 {
                0.0
            } else {
                tp as f64 / den as f64
            }
        };
        let (precision, recall) = (ratio(predicted), ratio(gold));
        ElementScores {
            tp,
            fp: predicted - tp,
            fn_: gold - tp,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    pub fn metrics(&self) -> MetricTriple {
        MetricTriple {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// Scores extracted phrases against gold phrases through [`align`].
pub fn score_elements<E: AsRef<str>, G: AsRef<str>>(extracted: &[E], gold: &[G], cfg: &MatchConfig) -> ElementScores {
    let alignment = align(extracted, gold, cfg);
    ElementScores::from_counts(alignment.len(), extracted.len(), gold.len())
}

/// Scores predicted edges. An edge is correct iff both endpoints map to gold
/// items and the mapped edge, same orientation, is a gold edge.
pub fn score_relation(
    predicted: &BTreeSet<(usize, usize)>,
    gold: &BTreeSet<(usize, usize)>,
    source_map: &Alignment,
    target_map: &Alignment,
) -> ElementScores {
    let lookup = |m: &Alignment, i: usize| m.to_gold.get(i).copied().flatten();
    let hits: BTreeSet<(usize, usize)> = predicted
        .iter()
        .filter_map(|&(s, t)| Some((lookup(source_map, s)?, lookup(target_map, t)?)))
        .filter(|e| gold.contains(e))
        .collect();
    ElementScores::from_counts(hits.len(), predicted.len(), gold.len())
}

/// How relation endpoints are tied to gold activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    /// The model was seeded with the gold activities; identity mapping.
    Gs,
    /// The model's own activities, aligned to gold by phrase matching.
    Ex,
}

impl RelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationMode::Gs => "gs",
            RelationMode::Ex => "ex",
        }
    }
}

/// Maps model activities onto gold activities for `mode`.
pub fn activity_map(
    model: &WorldModel,
    gold: &GoldStandard,
    mode: RelationMode,
    cfg: &MatchConfig,
) -> Result<Alignment, EvalError> {
    let extracted: Vec<&str> = model.activities().collect();
    match mode {
        RelationMode::Ex => Ok(align(&extracted, &gold.activity_surfaces(), cfg)),
        RelationMode::Gs => {
            let same = extracted.len() == gold.activities.len()
                && extracted
                    .iter()
                    .zip(&gold.activities)
                    .all(|(e, g)| normalize_surface(e) == normalize_surface(&g.surface));
            if !same {
                return Err(EvalError::ModeMismatch {
                    doc_id: model.doc_id().to_string(),
                });
            }
            Ok(Alignment::identity(extracted.len()))
        }
    }
}

/// Follows and performs scores of `model` in `mode`.
pub fn score_relations(
    model: &WorldModel,
    gold: &GoldStandard,
    mode: RelationMode,
    cfg: &MatchConfig,
) -> Result<(ElementScores, ElementScores), EvalError> {
    let activities = activity_map(model, gold, mode, cfg)?;
    let participants: Vec<&str> = model.participants().collect();
    let participants = align(&participants, &gold.participants, cfg);
    let follows = score_relation(&model.follows().collect(), &gold.follows, &activities, &activities);
    let performs = score_relation(&model.performs().collect(), &gold.performs, &participants, &activities);
    Ok((follows, performs))
}
