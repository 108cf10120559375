use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{MixedGraph, NodeId, NodeSet};

/// Separating sets recorded for removed edges, keyed by unordered pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetMap {
    sets: BTreeMap<(NodeId, NodeId), NodeSet>,
}

fn key(x: NodeId, y: NodeId) -> (NodeId, NodeId) {
    if x < y {
        (x, y)
    } else {
        (y, x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SepsetRecord {
    pub x: String,
    pub y: String,
    pub set: Vec<String>,
}

impl SepsetMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, x: NodeId, y: NodeId, set: NodeSet) {
        self.sets.insert(key(x, y), set);
    }

    pub fn get(&self, x: NodeId, y: NodeId) -> Option<&NodeSet> {
        self.sets.get(&key(x, y))
    }

    pub fn remove(&mut self, x: NodeId, y: NodeId) -> Option<NodeSet> {
        self.sets.remove(&key(x, y))
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, &NodeSet)> {
        self.sets.iter().map(|(&(x, y), s)| (x, y, s))
    }

    pub fn records(&self, g: &MixedGraph) -> Vec<SepsetRecord> {
        self.iter()
            .map(|(x, y, s)| SepsetRecord {
                x: g.name(x).to_string(),
                y: g.name(y).to_string(),
                set: g.names_of(s),
            })
            .collect()
    }

    pub fn to_json(&self, g: &MixedGraph) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.records(g))
    }
}
