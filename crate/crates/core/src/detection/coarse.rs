//! Object-level RANSAC similarity estimate with reprojection and scale checks.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{DetectionParams, ReprojectionCheck};
use super::vertices::VertexMatchSet;
use super::Rejection;
use crate::geometry::{horn_sim3, project, Sim3};
use crate::graph::CovisibilityGraph;
use crate::keyframe::KeyframeRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSim3Result {
    /// Maps current-frame coordinates into the candidate's frame.
    pub transform: Sim3,
    /// Indices into the match set.
    pub inliers: Vec<usize>,
    pub inlier_count: usize,
    pub inlier_ratio: f64,
    pub iterations: u32,
}

/// Center and major axis of one matched object pair.
#[derive(Debug, Clone, Copy)]
pub struct ObjectPair {
    pub current_center: Vector3<f64>,
    pub candidate_center: Vector3<f64>,
    pub current_major: f64,
    pub candidate_major: f64,
}

pub fn object_pairs(graph: &CovisibilityGraph, set: &VertexMatchSet) -> Vec<ObjectPair> {
    set.matches
        .iter()
        .map(|m| {
            let a = graph.landmark(m.current).expect("matched landmark exists");
            let b = graph.landmark(m.candidate).expect("matched landmark exists");
            ObjectPair {
                current_center: a.center,
                candidate_center: b.center,
                current_major: a.major_axis(),
                candidate_major: b.major_axis(),
            }
        })
        .collect()
}

/// Relative major-axis gap after scaling the current object into the
/// candidate frame.
pub fn scale_gap(scale: f64, current_major: f64, candidate_major: f64) -> f64 {
    let a = scale * current_major;
    let denom = a.max(candidate_major);
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (a - candidate_major).abs() / denom
}

fn reprojection_ok(
    transform: &Sim3,
    inverse: &Sim3,
    pair: &ObjectPair,
    current: &KeyframeRecord,
    candidate: &KeyframeRecord,
    params: &DetectionParams,
) -> bool {
    let into_candidate = || -> Option<f64> {
        let moved = project(
            &candidate.camera,
            &candidate.est_pose,
            &transform.apply(&pair.current_center),
        )
        .ok()?;
        let seen = project(&candidate.camera, &candidate.est_pose, &pair.candidate_center).ok()?;
        Some((moved - seen).norm())
    };
    let into_current = || -> Option<f64> {
        let moved = project(
            &current.camera,
            &current.est_pose,
            &inverse.apply(&pair.candidate_center),
        )
        .ok()?;
        let seen = project(&current.camera, &current.est_pose, &pair.current_center).ok()?;
        Some((moved - seen).norm())
    };
    let ok = |e: Option<f64>| e.is_some_and(|e| e < params.max_reproj_error_px);
    match params.reprojection_check {
        ReprojectionCheck::Both => ok(into_candidate()) && ok(into_current()),
        ReprojectionCheck::Either => ok(into_candidate()) || ok(into_current()),
    }
}

/// Indices of pairs consistent with `transform`.
pub fn object_inliers(
    transform: &Sim3,
    pairs: &[ObjectPair],
    current: &KeyframeRecord,
    candidate: &KeyframeRecord,
    params: &DetectionParams,
) -> Vec<usize> {
    let inverse = transform.inverse();
    pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            scale_gap(transform.scale(), p.current_major, p.candidate_major) < params.tau_s
                && reprojection_ok(transform, &inverse, p, current, candidate, params)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Samples three matched pairs at a time, fits a similarity to their centers
/// and accepts the first model whose consensus passes both inlier tests.
pub fn coarse_sim3(
    graph: &CovisibilityGraph,
    set: &VertexMatchSet,
    current: &KeyframeRecord,
    candidate: &KeyframeRecord,
    params: &DetectionParams,
    seed: u64,
) -> Result<CoarseSim3Result, Rejection> {
    let n = set.matches.len();
    if n < 3 {
        return Err(Rejection::TooFewMatches { count: n });
    }
    let pairs = object_pairs(graph, set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_inliers = 0;
    for iter in 1..=params.max_ransac_iters {
        let idx = sample(&mut rng, n, 3);
        let src: Vec<_> = idx.iter().map(|k| pairs[k].current_center).collect();
        let dst: Vec<_> = idx.iter().map(|k| pairs[k].candidate_center).collect();
        let Ok(transform) = horn_sim3(&src, &dst) else {
            continue;
        };
        let inliers = object_inliers(&transform, &pairs, current, candidate, params);
        let ratio = inliers.len() as f64 / n as f64;
        best_inliers = best_inliers.max(inliers.len());
        if params.count_passes(inliers.len()) && params.ratio_passes(ratio) {
            return Ok(CoarseSim3Result {
                transform,
                inlier_count: inliers.len(),
                inliers,
                inlier_ratio: ratio,
                iterations: iter,
            });
        }
    }
    Err(Rejection::NoConsensus {
        best_inliers,
        iterations: params.max_ransac_iters,
    })
}
