use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Kind of a behavioral element in an annotated control flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Activity,
    Gateway,
    Condition,
    Other,
}

impl NodeKind {
    pub fn is_activity(self) -> bool {
        matches!(self, NodeKind::Activity)
    }
}

/// Control-flow annotation of one document: behavioral nodes and directed
/// flow edges between them, addressed by node position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBehaviorGraph {
    kinds: Vec<NodeKind>,
    successors: Vec<Vec<usize>>,
}

impl RawBehaviorGraph {
    pub fn new(kinds: Vec<NodeKind>, edges: &[(usize, usize)]) -> Result<Self, CorpusError> {
        let mut successors = vec![Vec::new(); kinds.len()];
        for &(src, dst) in edges {
            if src >= kinds.len() || dst >= kinds.len() {
                return Err(CorpusError::Malformed(format!(
                    "flow edge ({src},{dst}) references a missing node"
                )));
            }
            if !successors[src].contains(&dst) {
                successors[src].push(dst);
            }
        }
        Ok(RawBehaviorGraph { kinds, successors })
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.successors[node]
    }
}

/// Directly-follows pairs between activity nodes.
///
/// `(a, b)` is returned iff a directed path from activity `a` to activity `b`
/// exists whose interior nodes are all non-activity elements (gateways,
/// conditions, ...). Pairs are node positions in `graph`; self pairs are
/// never emitted.
pub fn derive_follows(graph: &RawBehaviorGraph) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    let n = graph.kinds.len();
    for start in (0..n).filter(|&i| graph.kinds[i].is_activity()) {
        let mut visited = vec![false; n];
        let mut stack: Vec<usize> = graph.successors(start).to_vec();
        while let Some(node) = stack.pop() {
            if graph.kinds[node].is_activity() {
                if node != start {
                    out.insert((start, node));
                }
                continue;
            }
            if std::mem::replace(&mut visited[node], true) {
                continue;
            }
            stack.extend_from_slice(graph.successors(node));
        }
    }
    out
}
