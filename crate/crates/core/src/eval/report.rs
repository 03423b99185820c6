use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matching::MatchConfig;
use super::scores::{score_elements, score_relations, ElementScores, MetricTriple, RelationMode};
use super::EvalError;
use crate::corpus::GoldStandard;
use crate::prompting::Setting;
use crate::worldmodel::WorldModel;

/// Row kinds of the results table, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementRow {
    Activity,
    Participant,
    #[serde(rename = "Follows (gs)")]
    FollowsGs,
    #[serde(rename = "Follows (ex)")]
    FollowsEx,
    #[serde(rename = "Performs (gs)")]
    PerformsGs,
    #[serde(rename = "Performs (ex)")]
    PerformsEx,
}

impl ElementRow {
    pub const ALL: [ElementRow; 6] = [
        ElementRow::Activity,
        ElementRow::Participant,
        ElementRow::FollowsGs,
        ElementRow::FollowsEx,
        ElementRow::PerformsGs,
        ElementRow::PerformsEx,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ElementRow::Activity => "Activity",
            ElementRow::Participant => "Participant",
            ElementRow::FollowsGs => "Follows (gs)",
            ElementRow::FollowsEx => "Follows (ex)",
            ElementRow::PerformsGs => "Performs (gs)",
            ElementRow::PerformsEx => "Performs (ex)",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScores {
    pub doc_id: String,
    pub rows: BTreeMap<ElementRow, ElementScores>,
}

/// Scores one document.
///
/// `ex` is a run over Q1-extracted activities and `gs` a run seeded with the
/// gold activities. Activity and Participant rows come from `ex` when given,
/// otherwise from `gs`. Relation rows are produced for each model supplied.
pub fn score_document(
    gold: &GoldStandard,
    ex: Option<&WorldModel>,
    gs: Option<&WorldModel>,
    cfg: &MatchConfig,
) -> Result<DocumentScores, EvalError> {
    let mut rows = BTreeMap::new();
    if let Some(primary) = ex.or(gs) {
        let activities: Vec<&str> = primary.activities().collect();
        rows.insert(
            ElementRow::Activity,
            score_elements(&activities, &gold.activity_surfaces(), cfg),
        );
        let participants: Vec<&str> = primary.participants().collect();
        rows.insert(ElementRow::Participant, score_elements(&participants, &gold.participants, cfg));
    }
    for (model, mode, follows_row, performs_row) in [
        (gs, RelationMode::Gs, ElementRow::FollowsGs, ElementRow::PerformsGs),
        (ex, RelationMode::Ex, ElementRow::FollowsEx, ElementRow::PerformsEx),
    ] {
        if let Some(model) = model {
            if model.doc_id() != gold.doc_id {
                return Err(EvalError::DocumentMismatch {
                    model: model.doc_id().to_string(),
                    gold: gold.doc_id.clone(),
                });
            }
            let (follows, performs) = score_relations(model, gold, mode, cfg)?;
            rows.insert(follows_row, follows);
            rows.insert(performs_row, performs);
        }
    }
    Ok(DocumentScores {
        doc_id: gold.doc_id.clone(),
        rows,
    })
}

/// Arithmetic mean of each metric independently.
pub fn macro_average(rows: &[MetricTriple]) -> Result<MetricTriple, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyAverage);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricTriple) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(MetricTriple {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    })
}

/// Per-document scores and macro averages for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: Setting,
    pub documents: Vec<DocumentScores>,
    pub averages: BTreeMap<ElementRow, MetricTriple>,
}

impl EvalReport {
    /// Averages each row over the documents that have it.
    pub fn new(setting: Setting, documents: Vec<DocumentScores>) -> Self {
        let averages = ElementRow::ALL
            .into_iter()
            .filter_map(|row| {
                let values: Vec<MetricTriple> = documents
                    .iter()
                    .filter_map(|d| d.rows.get(&row).map(ElementScores::metrics))
                    .collect();
                macro_average(&values).ok().map(|m| (row, m))
            })
            .collect();
        EvalReport {
            setting,
            documents,
            averages,
        }
    }
}

/// Rounds half away from zero at two decimals. A tolerance of 1e-9 absorbs
/// binary representation error so that 0.825 rounds to 0.83.
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-9).floor() / 100.0
}

pub fn fmt2(x: f64) -> String {
    format!("{:.2}", round2(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableLayout {
    /// Aligned columns, one P/R/F1 group per setting.
    #[default]
    Text,
    /// `document,element,setting,precision,recall,f1`, one line per cell.
    Csv,
}

type Cell = Option<MetricTriple>;

fn table_rows(reports: &[EvalReport]) -> Vec<(String, ElementRow, Vec<Cell>)> {
    let mut doc_ids: Vec<&str> = Vec::new();
    for r in reports {
        for d in &r.documents {
            if !doc_ids.contains(&d.doc_id.as_str()) {
                doc_ids.push(&d.doc_id);
            }
        }
    }
    let mut out = Vec::new();
    for id in doc_ids {
        for row in ElementRow::ALL {
            let cells: Vec<Cell> = reports
                .iter()
                .map(|r| {
                    r.documents
                        .iter()
                        .find(|d| d.doc_id == id)
                        .and_then(|d| d.rows.get(&row))
                        .map(ElementScores::metrics)
                })
                .collect();
            if cells.iter().any(Option::is_some) {
                out.push((id.to_string(), row, cells));
            }
        }
    }
    for row in ElementRow::ALL {
        let cells: Vec<Cell> = reports.iter().map(|r| r.averages.get(&row).copied()).collect();
        if cells.iter().any(Option::is_some) {
            out.push(("average".to_string(), row, cells));
        }
    }
    out
}

/// Renders reports side by side, one column group per report.
pub fn render_table(reports: &[EvalReport], layout: TableLayout) -> String {
    let rows = table_rows(reports);
    match layout {
        TableLayout::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["document", "element", "setting", "precision", "recall", "f1"])
                .expect("in-memory write");
            for (doc, row, cells) in &rows {
                for (report, cell) in reports.iter().zip(cells) {
                    if let Some(m) = cell {
                        w.write_record([
                            doc.as_str(),
                            row.label(),
                            report.setting.as_str(),
                            &fmt2(m.precision),
                            &fmt2(m.recall),
                            &fmt2(m.f1),
                        ])
                        .expect("in-memory write");
                    }
                }
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
        TableLayout::Text => {
            let mut out = String::new();
            let _ = write!(out, "{:<8} {:<14}", "Document", "Element");
            for r in reports {
                let _ = write!(out, " | {:^14}", r.setting.label());
            }
            out.push('\n');
            let _ = write!(out, "{:<8} {:<14}", "", "");
            for _ in reports {
                let _ = write!(out, " | {:>4} {:>4} {:>4}", "P", "R", "F1");
            }
            out.push('\n');
            let mut last_doc = "";
            for (doc, row, cells) in &rows {
                let shown = if doc == last_doc { "" } else { doc.as_str() };
                if doc == "average" && last_doc != "average" {
                    out.push('\n');
                }
                let _ = write!(out, "{:<8} {:<14}", shown, row.label());
                for cell in cells {
                    match cell {
                        Some(m) => {
                            let _ = write!(out, " | {} {} {}", fmt2(m.precision), fmt2(m.recall), fmt2(m.f1));
                        }
                        None => {
                            let _ = write!(out, " | {:>4} {:>4} {:>4}", "-", "-", "-");
                        }
                    }
                }
                out.push('\n');
                last_doc = doc;
            }
            out
        }
    }
}
