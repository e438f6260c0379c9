//! Vertex mapping between two covisibility subgraphs.

use serde::{Deserialize, Serialize};

use super::Rejection;
use crate::assignment::{max_weight_matching, ScoreMatrix};
use crate::descriptors::{best_appearance_score, bhattacharyya, l1_similarity, pair_similarity};
use crate::graph::{CovisibilityGraph, CovisibilitySubgraph, ObjectLandmark};
use crate::keyframe::{KeyframeId, LandmarkId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexMatch {
    pub current: LandmarkId,
    pub candidate: LandmarkId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexMatchSet {
    pub matches: Vec<VertexMatch>,
    pub count: usize,
    pub total_score: f64,
    pub average_score: f64,
}

impl VertexMatchSet {
    pub fn from_matches(matches: Vec<VertexMatch>) -> Self {
        let total_score: f64 = matches.iter().map(|m| m.score).sum();
        let count = matches.len();
        let average_score = average_similarity(total_score, count);
        Self {
            matches,
            count,
            total_score,
            average_score,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}

/// Mean pair score, `0` for an empty matching.
pub fn average_similarity(total_score: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        total_score / count as f64
    }
}

/// Appearance score of a vertex pair, using the patches seen on the two
/// keyframes when both exist and the best pair over all patches otherwise.
pub fn appearance_score(
    current: &ObjectLandmark,
    candidate: &ObjectLandmark,
    current_kf: KeyframeId,
    candidate_kf: KeyframeId,
) -> f64 {
    let res = match (
        current.patch_descriptors.get(&current_kf),
        candidate.patch_descriptors.get(&candidate_kf),
    ) {
        (Some(a), Some(b)) => l1_similarity(a, b),
        _ => best_appearance_score(current.patch_descriptors.values(), candidate.patch_descriptors.values()),
    };
    res.unwrap_or(0.0)
}

pub fn vertex_pair_score(
    current: &ObjectLandmark,
    candidate: &ObjectLandmark,
    current_kf: KeyframeId,
    candidate_kf: KeyframeId,
) -> f64 {
    let appearance = appearance_score(current, candidate, current_kf, candidate_kf);
    let class = bhattacharyya(&current.class_dist, &candidate.class_dist).unwrap_or(0.0);
    pair_similarity(appearance, class)
}

/// Full score matrix with rows over `current.vertex_ids` and columns over
/// `candidate.vertex_ids`. `None` when either side is empty.
pub fn score_matrix(
    graph: &CovisibilityGraph,
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    current_kf: KeyframeId,
    candidate_kf: KeyframeId,
) -> Option<ScoreMatrix> {
    if current.is_empty() || candidate.is_empty() {
        return None;
    }
    let lookup = |id: LandmarkId| graph.landmark(id).expect("subgraph vertex exists in graph");
    let mut data = Vec::with_capacity(current.len() * candidate.len());
    for &i in &current.vertex_ids {
        let vi = lookup(i);
        for &j in &candidate.vertex_ids {
            data.push(vertex_pair_score(vi, lookup(j), current_kf, candidate_kf).clamp(0.0, 1.0));
        }
    }
    ScoreMatrix::new(current.len(), candidate.len(), data).ok()
}

/// Optimal matching before any threshold is applied.
pub fn optimal_matches(
    graph: &CovisibilityGraph,
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    current_kf: KeyframeId,
    candidate_kf: KeyframeId,
) -> Vec<VertexMatch> {
    let Some(m) = score_matrix(graph, current, candidate, current_kf, candidate_kf) else {
        return Vec::new();
    };
    max_weight_matching(&m)
        .pairs
        .into_iter()
        .map(|(i, j)| VertexMatch {
            current: current.vertex_ids[i],
            candidate: candidate.vertex_ids[j],
            score: m.get(i, j),
        })
        .collect()
}

/// Drops pairs scoring below `tau_n`.
pub fn filter_matches(matches: &[VertexMatch], tau_n: f64) -> VertexMatchSet {
    VertexMatchSet::from_matches(matches.iter().copied().filter(|m| m.score >= tau_n).collect())
}

/// Maps vertices of `current` onto `candidate`, gates on the average pair
/// score over the full matching and then drops weak pairs.
pub fn match_vertices(
    graph: &CovisibilityGraph,
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    current_kf: KeyframeId,
    candidate_kf: KeyframeId,
    tau_as: f64,
    tau_n: f64,
) -> Result<VertexMatchSet, Rejection> {
    let raw = optimal_matches(graph, current, candidate, current_kf, candidate_kf);
    if raw.is_empty() {
        return Err(Rejection::EmptyMatch);
    }
    let average = average_similarity(raw.iter().map(|m| m.score).sum(), raw.len());
    if average < tau_as {
        return Err(Rejection::LowAverageSimilarity { average });
    }
    let set = filter_matches(&raw, tau_n);
    if set.is_empty() {
        return Err(Rejection::EmptyMatch);
    }
    Ok(set)
}
