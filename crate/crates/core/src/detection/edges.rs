//! Edge comparison by normalized cross-correlation of adjacency matrices.

use nalgebra::DMatrix;

use super::vertices::VertexMatchSet;
use super::Rejection;
use crate::graph::{adjacency_matrix, CovisibilitySubgraph};
use crate::keyframe::LandmarkId;

/// `Σ a∘b / sqrt(Σa² · Σb²)`, defined as 0 when either matrix is all zero.
pub fn ncc(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "adjacency matrices must align");
    let denom = (a.norm_squared() * b.norm_squared()).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    a.component_mul(b).sum() / denom
}

/// Adjacency matrices over the matched vertices, rows aligned by the matching.
pub fn matched_adjacency(
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    set: &VertexMatchSet,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let cur: Vec<LandmarkId> = set.matches.iter().map(|m| m.current).collect();
    let cand: Vec<LandmarkId> = set.matches.iter().map(|m| m.candidate).collect();
    let a = adjacency_matrix(current, &cur).expect("matched vertices belong to the subgraph");
    let b = adjacency_matrix(candidate, &cand).expect("matched vertices belong to the subgraph");
    (a, b)
}

pub fn edge_similarity(current: &CovisibilitySubgraph, candidate: &CovisibilitySubgraph, set: &VertexMatchSet) -> f64 {
    let (a, b) = matched_adjacency(current, candidate, set);
    ncc(&b, &a)
}

/// Applies the edge threshold. With `skip_without_edges`, a match of at least
/// three vertices where neither side has an edge passes with score 0.
pub fn edge_test(
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    set: &VertexMatchSet,
    tau_e: f64,
    skip_without_edges: bool,
) -> Result<f64, Rejection> {
    let (a, b) = matched_adjacency(current, candidate, set);
    let score = ncc(&b, &a);
    if score > tau_e {
        return Ok(score);
    }
    if skip_without_edges && set.count >= 3 && a.sum() == 0.0 && b.sum() == 0.0 {
        return Ok(score);
    }
    Err(Rejection::LowEdgeSimilarity { score })
}
