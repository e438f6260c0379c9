use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{CovisibilityGraph, GraphError};
use crate::keyframe::{KeyframeId, KeyframeRecord, RecordError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Keyframe store plus the object covisibility graph built from it.
#[derive(Debug, Clone, Default)]
pub struct MapDatabase {
    keyframes: BTreeMap<KeyframeId, KeyframeRecord>,
    graph: CovisibilityGraph,
}

impl MapDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_graph(graph: CovisibilityGraph) -> Self {
        Self {
            keyframes: BTreeMap::new(),
            graph,
        }
    }

    pub fn integrate(&mut self, kf: KeyframeRecord) -> Result<(), MapError> {
        kf.validate()?;
        self.graph.integrate_keyframe(&kf)?;
        self.keyframes.insert(kf.id, kf);
        Ok(())
    }

    pub fn graph(&self) -> &CovisibilityGraph {
        &self.graph
    }

    pub fn keyframe(&self, id: KeyframeId) -> Option<&KeyframeRecord> {
        self.keyframes.get(&id)
    }

    pub fn keyframes(&self) -> impl Iterator<Item = &KeyframeRecord> {
        self.keyframes.values()
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    /// Keyframes other than `kf` sharing at least one landmark with it.
    pub fn covisible_neighbors(&self, kf: KeyframeId) -> BTreeSet<KeyframeId> {
        let mut out = BTreeSet::new();
        if let Some(ids) = self.graph.keyframe_vertices(kf) {
            for id in ids {
                if let Some(lm) = self.graph.landmark(*id) {
                    out.extend(lm.observing_keyframes.iter().copied());
                }
            }
        }
        out.remove(&kf);
        out
    }
}
