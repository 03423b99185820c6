//! Conversion of raw control-flow annotations into canonical corpus records.
//!
//! Raw files carry behavioral nodes (activities and the gateways or
//! conditions between them) and flow edges addressed by node id:
//!
//! ```json
//! {"id": "10.1", "body": "...",
//!  "nodes": [{"id": "a0", "kind": "activity", "verb": "receives", "data": "the order", "offset": 10},
//!            {"id": "g", "kind": "gateway"}],
//!  "edges": [["a0", "g"]],
//!  "participants": [{"id": "clerk", "text": "clerk"}],
//!  "performs": [["clerk", "a0"]]}
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::follows::{derive_follows, NodeKind, RawBehaviorGraph};
use super::{ActivityPhrase, CorpusError, CorpusRecord, GoldRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: String,
    pub kind: NodeKind,
    /// Verbal part of an activity. Defaults to the node id.
    #[serde(default)]
    pub verb: Option<String>,
    /// Activity data appended after the verb.
    #[serde(default)]
    pub data: Option<String>,
    /// Byte offset of the verb in the body; searched for when absent.
    #[serde(default)]
    pub offset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawParticipant {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
    pub nodes: Vec<RawNode>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub participants: Vec<RawParticipant>,
    /// `(participant id, activity node id)` pairs.
    #[serde(default)]
    pub performs: Vec<(String, String)>,
}

/// Builds a canonical record from a raw annotation.
///
/// Activity surfaces are the verb followed by the activity data, joined by
/// one space, ordered by verb offset. Follows pairs come from
/// [`derive_follows`]. `id` and `body` override the values in the file.
pub fn import_raw_document(
    raw: &RawDocument,
    id: Option<&str>,
    body: Option<&str>,
) -> Result<CorpusRecord, CorpusError> {
    let id = id
        .map(str::to_string)
        .or_else(|| raw.id.clone())
        .ok_or_else(|| CorpusError::Malformed("raw document has no id".into()))?;
    let body = body
        .map(str::to_string)
        .or_else(|| raw.body.clone())
        .ok_or_else(|| CorpusError::invariant(&id, "raw document has no body"))?;

    let mut node_pos = HashMap::new();
    for (i, node) in raw.nodes.iter().enumerate() {
        if node_pos.insert(node.id.as_str(), i).is_some() {
            return Err(CorpusError::invariant(&id, format!("node id {} is duplicated", node.id)));
        }
    }
    let lookup = |name: &str| {
        node_pos
            .get(name)
            .copied()
            .ok_or_else(|| CorpusError::invariant(&id, format!("edge references unknown node {name}")))
    };
    let edges = raw
        .edges
        .iter()
        .map(|(s, t)| Ok((lookup(s)?, lookup(t)?)))
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let graph = RawBehaviorGraph::new(raw.nodes.iter().map(|n| n.kind).collect(), &edges)?;

    // (offset, node position, surface) for every activity node
    let mut activities = Vec::new();
    for (pos, node) in raw.nodes.iter().enumerate() {
        if !node.kind.is_activity() {
            continue;
        }
        let verb = node.verb.as_deref().unwrap_or(&node.id).trim();
        let offset = match node.offset {
            Some(o) => o,
            None => body.find(verb).ok_or_else(|| {
                CorpusError::invariant(&id, format!("verb {verb:?} of node {} not found in body", node.id))
            })?,
        };
        let surface = match node.data.as_deref().map(str::trim) {
            Some(data) if !data.is_empty() => format!("{verb} {data}"),
            _ => verb.to_string(),
        };
        activities.push((offset, pos, surface));
    }
    activities.sort();
    let mut activity_of_node = HashMap::new();
    for (i, (_, pos, _)) in activities.iter().enumerate() {
        activity_of_node.insert(*pos, i);
    }

    let follows = derive_follows(&graph)
        .into_iter()
        .map(|(a, b)| [activity_of_node[&a], activity_of_node[&b]])
        .collect::<std::collections::BTreeSet<_>>();

    let participant_pos: HashMap<&str, usize> = raw
        .participants
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut performs = Vec::new();
    for (pid, nid) in &raw.performs {
        let p = *participant_pos
            .get(pid.as_str())
            .ok_or_else(|| CorpusError::invariant(&id, format!("performs references unknown participant {pid}")))?;
        let node = lookup(nid)?;
        let a = *activity_of_node
            .get(&node)
            .ok_or_else(|| CorpusError::invariant(&id, format!("performs target {nid} is not an activity")))?;
        performs.push([p, a]);
    }
    performs.sort();
    performs.dedup();

    let record = CorpusRecord {
        id,
        body,
        gold: GoldRecord {
            activities: activities
                .into_iter()
                .map(|(index, _, surface)| ActivityPhrase { surface, index })
                .collect(),
            participants: raw.participants.iter().map(|p| p.text.clone()).collect(),
            performs,
            follows: follows.into_iter().collect(),
        },
    };
    // validate through the canonical path
    record.clone().into_entry()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, kind: NodeKind, verb: Option<&str>) -> RawNode {
        RawNode {
            id: id.into(),
            kind,
            verb: verb.map(Into::into),
            data: None,
            offset: None,
        }
    }

    #[test]
    fn bare_nodes_and_edges_import() {
        let raw: RawDocument = serde_json::from_str(
            r#"{"nodes":[{"id":"A","kind":"activity"},{"id":"g","kind":"gateway"},{"id":"B","kind":"activity"}],
                "edges":[["A","g"],["g","B"]]}"#,
        )
        .unwrap();
        let rec = import_raw_document(&raw, Some("t"), Some("A then B")).unwrap();
        assert_eq!(rec.gold.follows, vec![[0, 1]]);
        assert_eq!(rec.gold.activities[1].surface, "B");
        assert_eq!(rec.gold.activities[1].index, 7);
    }

    #[test]
    fn activities_sorted_by_offset() {
        let raw = RawDocument {
            id: Some("t".into()),
            body: Some("first close then open".into()),
            nodes: vec![node("o", NodeKind::Activity, Some("open")), node("c", NodeKind::Activity, Some("close"))],
            edges: vec![("c".into(), "o".into())],
            participants: vec![],
            performs: vec![],
        };
        let rec = import_raw_document(&raw, None, None).unwrap();
        let surfaces: Vec<_> = rec.gold.activities.iter().map(|a| a.surface.as_str()).collect();
        assert_eq!(surfaces, ["close", "open"]);
        assert_eq!(rec.gold.follows, vec![[0, 1]]);
    }

    #[test]
    fn unknown_edge_endpoint_rejected() {
        let raw = RawDocument {
            id: Some("t".into()),
            body: Some("x".into()),
            nodes: vec![],
            edges: vec![("a".into(), "b".into())],
            participants: vec![],
            performs: vec![],
        };
        assert!(import_raw_document(&raw, None, None).is_err());
    }

    #[test]
    fn missing_body_rejected() {
        let raw = RawDocument {
            id: Some("t".into()),
            body: None,
            nodes: vec![],
            edges: vec![],
            participants: vec![],
            performs: vec![],
        };
        assert!(import_raw_document(&raw, None, None).is_err());
    }
}
