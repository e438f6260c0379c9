//! Object covisibility graph: map objects as vertices, linked once they have
//! been co-observed in enough keyframes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::{BowVector, ClassDistribution, DescriptorError};
use crate::keyframe::{KeyframeId, KeyframeRecord, LandmarkId, ObjectObservation};

/// Co-observation count at which an edge appears.
pub const DEFAULT_EDGE_THRESHOLD: u32 = 3;

/// Association radius for detections without a landmark id (meters).
pub const ASSOCIATION_RADIUS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("keyframe {0} was already integrated")]
    DuplicateKeyframe(KeyframeId),
    #[error("keyframe {0} is older than the last integrated keyframe {1}")]
    OutOfOrderKeyframe(KeyframeId, KeyframeId),
    #[error("keyframe {0} is not in the graph")]
    UnknownKeyframe(KeyframeId),
    #[error("landmark {0} is not in the subgraph")]
    UnknownVertex(LandmarkId),
    #[error("landmark {0} listed twice")]
    DuplicateVertex(LandmarkId),
    #[error("keyframe {0}, observation {1}: {2}")]
    InvalidObservation(KeyframeId, usize, DescriptorError),
}

/// A mapped semantic object (graph vertex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLandmark {
    pub id: LandmarkId,
    /// Principal axis lengths, sorted so that `axes[0] >= axes[1] >= axes[2]`.
    pub axes: [f64; 3],
    pub center: Vector3<f64>,
    pub class_dist: ClassDistribution,
    pub observing_keyframes: BTreeSet<KeyframeId>,
    pub patch_descriptors: BTreeMap<KeyframeId, BowVector>,
    /// Ground-truth object of the first associated detection, evaluation only.
    pub gt_object: Option<u32>,
}

impl ObjectLandmark {
    fn from_observation(id: LandmarkId, kf: KeyframeId, obs: &ObjectObservation) -> Result<Self, DescriptorError> {
        Ok(Self {
            id,
            axes: sorted_axes(obs.axes),
            center: obs.center,
            class_dist: ClassDistribution::from_scores(&obs.class_scores)?,
            observing_keyframes: BTreeSet::from([kf]),
            patch_descriptors: BTreeMap::from([(kf, obs.patch_bow.clone())]),
            gt_object: obs.gt_object,
        })
    }

    fn absorb(&mut self, kf: KeyframeId, obs: &ObjectObservation) -> Result<(), DescriptorError> {
        self.class_dist.fuse(&obs.class_scores)?;
        let n = self.observing_keyframes.len() as f64;
        self.center += (obs.center - self.center) / (n + 1.0);
        for (mine, seen) in self.axes.iter_mut().zip(sorted_axes(obs.axes)) {
            *mine = mine.max(seen);
        }
        self.observing_keyframes.insert(kf);
        self.patch_descriptors.insert(kf, obs.patch_bow.clone());
        Ok(())
    }

    /// Major axis length.
    pub fn major_axis(&self) -> f64 {
        self.axes[0]
    }
}

fn sorted_axes(mut axes: [f64; 3]) -> [f64; 3] {
    axes.sort_by(|a, b| b.total_cmp(a));
    axes
}

fn ordered(a: LandmarkId, b: LandmarkId) -> (LandmarkId, LandmarkId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovisibilityGraph {
    landmarks: BTreeMap<LandmarkId, ObjectLandmark>,
    co_obs_counts: BTreeMap<(LandmarkId, LandmarkId), u32>,
    edges: BTreeSet<(LandmarkId, LandmarkId)>,
    keyframe_vertices: BTreeMap<KeyframeId, Vec<LandmarkId>>,
    edge_threshold: u32,
}

impl Default for CovisibilityGraph {
    fn default() -> Self {
        Self::new(DEFAULT_EDGE_THRESHOLD)
    }
}

impl CovisibilityGraph {
    pub fn new(edge_threshold: u32) -> Self {
        Self {
            landmarks: BTreeMap::new(),
            co_obs_counts: BTreeMap::new(),
            edges: BTreeSet::new(),
            keyframe_vertices: BTreeMap::new(),
            edge_threshold: edge_threshold.max(1),
        }
    }

    pub fn edge_threshold(&self) -> u32 {
        self.edge_threshold
    }

    pub fn vertex_count(&self) -> usize {
        self.landmarks.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn landmark(&self, id: LandmarkId) -> Option<&ObjectLandmark> {
        self.landmarks.get(&id)
    }

    pub fn landmarks(&self) -> impl Iterator<Item = &ObjectLandmark> {
        self.landmarks.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = (LandmarkId, LandmarkId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: LandmarkId, b: LandmarkId) -> bool {
        self.edges.contains(&ordered(a, b))
    }

    pub fn co_observations(&self, a: LandmarkId, b: LandmarkId) -> u32 {
        self.co_obs_counts.get(&ordered(a, b)).copied().unwrap_or(0)
    }

    pub fn contains_keyframe(&self, kf: KeyframeId) -> bool {
        self.keyframe_vertices.contains_key(&kf)
    }

    /// Landmarks observed on keyframe `kf`, in ascending id order.
    pub fn keyframe_vertices(&self, kf: KeyframeId) -> Option<&[LandmarkId]> {
        self.keyframe_vertices.get(&kf).map(Vec::as_slice)
    }

    /// Adds a keyframe: associates its detections, updates vertices, counts
    /// co-observations and creates edges that reach the threshold.
    pub fn integrate_keyframe(&mut self, kf: &KeyframeRecord) -> Result<(), GraphError> {
        if self.keyframe_vertices.contains_key(&kf.id) {
            return Err(GraphError::DuplicateKeyframe(kf.id));
        }
        if let Some((&last, _)) = self.keyframe_vertices.last_key_value() {
            if kf.id < last {
                return Err(GraphError::OutOfOrderKeyframe(kf.id, last));
            }
        }
        for (i, obs) in kf.object_obs.iter().enumerate() {
            if let Some(lm) = self.landmarks.values().next() {
                if lm.class_dist.len() != obs.class_scores.len() {
                    return Err(GraphError::InvalidObservation(
                        kf.id,
                        i,
                        DescriptorError::ClassSetMismatch(lm.class_dist.len(), obs.class_scores.len()),
                    ));
                }
            }
            ClassDistribution::from_scores(&obs.class_scores)
                .map_err(|e| GraphError::InvalidObservation(kf.id, i, e))?;
        }

        let mut seen: BTreeSet<LandmarkId> = BTreeSet::new();
        for (i, obs) in kf.object_obs.iter().enumerate() {
            let id = match obs.landmark {
                Some(id) => id,
                None => self.associate(obs, &seen),
            };
            if !seen.insert(id) {
                continue;
            }
            let res = match self.landmarks.get_mut(&id) {
                Some(lm) => lm.absorb(kf.id, obs),
                None => ObjectLandmark::from_observation(id, kf.id, obs).map(|lm| {
                    self.landmarks.insert(id, lm);
                }),
            };
            res.map_err(|e| GraphError::InvalidObservation(kf.id, i, e))?;
        }

        let ids: Vec<LandmarkId> = seen.into_iter().collect();
        for (a_idx, &a) in ids.iter().enumerate() {
            for &b in &ids[a_idx + 1..] {
                let count = self.co_obs_counts.entry((a, b)).or_insert(0);
                *count += 1;
                if *count >= self.edge_threshold {
                    self.edges.insert((a, b));
                }
            }
        }
        self.keyframe_vertices.insert(kf.id, ids);
        Ok(())
    }

    /// Nearest landmark within [`ASSOCIATION_RADIUS`] with the same most likely
    /// class, or a fresh id.
    fn associate(&self, obs: &ObjectObservation, taken: &BTreeSet<LandmarkId>) -> LandmarkId {
        let class = ClassDistribution::from_scores(&obs.class_scores)
            .map(|d| d.argmax())
            .ok();
        let nearest = self
            .landmarks
            .values()
            .filter(|lm| !taken.contains(&lm.id) && Some(lm.class_dist.argmax()) == class)
            .map(|lm| ((lm.center - obs.center).norm(), lm.id))
            .filter(|(d, _)| *d <= ASSOCIATION_RADIUS)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((_, id)) => id,
            None => {
                let next = self.landmarks.keys().next_back().map_or(0, |id| id.0 + 1);
                let taken_max = taken.iter().next_back().map_or(0, |id| id.0 + 1);
                LandmarkId(next.max(taken_max))
            }
        }
    }

    /// Vertex-induced subgraph over the landmarks observed on `kf`.
    pub fn subgraph_for(&self, kf: KeyframeId) -> Result<CovisibilitySubgraph, GraphError> {
        let ids = self.keyframe_vertices.get(&kf).ok_or(GraphError::UnknownKeyframe(kf))?;
        Ok(self.induced(ids.clone()))
    }

    /// Vertex-induced subgraph over an arbitrary set of landmarks.
    pub fn induced(&self, mut vertex_ids: Vec<LandmarkId>) -> CovisibilitySubgraph {
        vertex_ids.sort();
        vertex_ids.dedup();
        let mut edges = BTreeSet::new();
        for (i, &a) in vertex_ids.iter().enumerate() {
            for (j, &b) in vertex_ids.iter().enumerate().skip(i + 1) {
                if self.has_edge(a, b) {
                    edges.insert((i, j));
                }
            }
        }
        CovisibilitySubgraph { vertex_ids, edges }
    }

    pub fn full_subgraph(&self) -> CovisibilitySubgraph {
        self.induced(self.landmarks.keys().copied().collect())
    }
}

/// Vertex-induced subgraph; edges are index pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CovisibilitySubgraph {
    pub vertex_ids: Vec<LandmarkId>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl CovisibilitySubgraph {
    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn index_of(&self, id: LandmarkId) -> Option<usize> {
        self.vertex_ids.binary_search(&id).ok()
    }

    pub fn has_edge(&self, a: LandmarkId, b: LandmarkId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.edges.contains(&(i.min(j), i.max(j))),
            _ => false,
        }
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = (LandmarkId, LandmarkId)> + '_ {
        self.edges
            .iter()
            .map(|&(i, j)| (self.vertex_ids[i], self.vertex_ids[j]))
    }
}

/// Symmetric 0/1 adjacency matrix with rows and columns in `order`.
pub fn adjacency_matrix(sub: &CovisibilitySubgraph, order: &[LandmarkId]) -> Result<DMatrix<f64>, GraphError> {
    let mut seen = BTreeSet::new();
    for &id in order {
        if sub.index_of(id).is_none() {
            return Err(GraphError::UnknownVertex(id));
        }
        if !seen.insert(id) {
            return Err(GraphError::DuplicateVertex(id));
        }
    }
    let n = order.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i != j && sub.has_edge(order[i], order[j]) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Colors for a DOT rendering; anything without an entry is drawn black.
#[derive(Debug, Clone, Default)]
pub struct DotStyle {
    pub vertex_colors: BTreeMap<LandmarkId, String>,
    pub edge_colors: BTreeMap<(LandmarkId, LandmarkId), String>,
    /// Optional class names indexed by class id.
    pub class_names: Vec<String>,
}

impl DotStyle {
    pub fn edge_color(&self, a: LandmarkId, b: LandmarkId) -> Option<&str> {
        self.edge_colors.get(&ordered(a, b)).map(String::as_str)
    }

    pub fn set_edge_color(&mut self, a: LandmarkId, b: LandmarkId, color: impl Into<String>) {
        self.edge_colors.insert(ordered(a, b), color.into());
    }
}

/// Renders a subgraph as an undirected Graphviz graph. Vertices are labeled
/// with their most likely class and landmark id.
pub fn to_dot(graph: &CovisibilityGraph, sub: &CovisibilitySubgraph, name: &str, style: &DotStyle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph \"{}\" {{", name.replace('"', "'"));
    let _ = writeln!(out, "  node [shape=ellipse];");
    for &id in &sub.vertex_ids {
        let class = graph.landmark(id).map(|lm| lm.class_dist.argmax());
        let class_label = match class {
            Some(c) => style.class_names.get(c).cloned().unwrap_or_else(|| format!("class{c}")),
            None => "unknown".to_string(),
        };
        let color = style.vertex_colors.get(&id).map_or("black", String::as_str);
        let _ = writeln!(out, "  v{id} [label=\"{class_label}#{id}\", color=\"{color}\"];");
    }
    for (a, b) in sub.edge_ids() {
        let color = style.edge_color(a, b).unwrap_or("black");
        let _ = writeln!(out, "  v{a} -- v{b} [color=\"{color}\"];");
    }
    out.push_str("}\n");
    out
}
