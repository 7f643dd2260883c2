use serde::{Deserialize, Serialize};

use super::{Coalition, LocationId, NodeId, Time};

/// One unit of work: `coalition` works the node at `time`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkEntry {
    pub time: Time,
    pub coalition: Coalition,
}

/// All work done on one node, at the single location chosen for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeVisit {
    pub node: NodeId,
    pub location: LocationId,
    pub entries: Vec<WorkEntry>,
}

impl NodeVisit {
    pub fn new(node: NodeId, location: LocationId, mut entries: Vec<WorkEntry>) -> Self {
        entries.sort_by_key(|e| e.time);
        Self { node, location, entries }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub solver: String,
    pub wall_millis: f64,
    pub traversals: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub visits: Vec<NodeVisit>,
    #[serde(default)]
    pub metadata: SolveMetadata,
}

impl Solution {
    pub fn from_visits(visits: Vec<NodeVisit>) -> Self {
        Self {
            visits,
            metadata: SolveMetadata::default(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn visit(&self, node: NodeId) -> Option<&NodeVisit> {
        self.visits.iter().find(|v| v.node == node)
    }

    /// The visits alone, for comparing solver output without metadata.
    pub fn plan(&self) -> &[NodeVisit] {
        &self.visits
    }
}
