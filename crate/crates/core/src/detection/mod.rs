//! Loop detection: candidate proposal, vertex mapping, object-level RANSAC,
//! edge comparison and point-level refinement.

mod candidates;
mod coarse;
mod correction;
mod edges;
mod params;
mod refine;
mod vertices;

use serde::{Deserialize, Serialize};
use tracing::debug;

pub use candidates::{min_score_threshold, raw_candidates, Candidate, TemporalConsistency};
pub use coarse::{coarse_sim3, object_inliers, object_pairs, scale_gap, CoarseSim3Result, ObjectPair};
pub use correction::{apply_correction, CorrectionError};
pub use edges::{edge_similarity, edge_test, matched_adjacency, ncc};
pub use params::{DetectionParams, ParamsError, ReprojectionCheck, ENV_PREFIX};
pub use refine::{match_points, refine_sim3, RefineResult};
pub use vertices::{
    appearance_score, average_similarity, filter_matches, match_vertices, optimal_matches, score_matrix,
    vertex_pair_score, VertexMatch, VertexMatchSet,
};

use crate::geometry::Sim3;
use crate::keyframe::KeyframeId;
use crate::map::MapDatabase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Vertices,
    Coarse,
    Edges,
    Refine,
}

/// Why a candidate was turned down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    EmptyMatch,
    LowAverageSimilarity { average: f64 },
    TooFewMatches { count: usize },
    NoConsensus { best_inliers: usize, iterations: u32 },
    LowEdgeSimilarity { score: f64 },
    InsufficientPointInliers { inliers: usize, point_matches: usize },
}

impl Rejection {
    pub fn stage(&self) -> Stage {
        match self {
            Rejection::EmptyMatch | Rejection::LowAverageSimilarity { .. } => Stage::Vertices,
            Rejection::TooFewMatches { .. } | Rejection::NoConsensus { .. } => Stage::Coarse,
            Rejection::LowEdgeSimilarity { .. } => Stage::Edges,
            Rejection::InsufficientPointInliers { .. } => Stage::Refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopClosureReport {
    pub current_kf: KeyframeId,
    pub loop_kf: KeyframeId,
    pub bow_score: f64,
    pub match_set: VertexMatchSet,
    pub coarse: CoarseSim3Result,
    pub edge_score: f64,
    pub refined: Sim3,
    pub refine_inliers: usize,
    pub point_matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRejection {
    pub loop_kf: KeyframeId,
    pub stage: Stage,
    #[serde(flatten)]
    pub rejection: Rejection,
}

/// Everything that happened while processing one query keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrace {
    pub current_kf: KeyframeId,
    pub s_min: f64,
    /// Candidates passing the BoW threshold, before temporal consistency.
    pub raw_candidates: Vec<Candidate>,
    /// Candidates that were verified.
    pub verified: Vec<Candidate>,
    pub rejections: Vec<CandidateRejection>,
    pub report: Option<LoopClosureReport>,
}

/// Per-candidate RANSAC seed, so that results do not depend on which other
/// candidates were tried first.
pub fn candidate_seed(base: u64, current: KeyframeId, candidate: KeyframeId) -> u64 {
    let mut z = base ^ current.0.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ candidate.0.rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every verification stage on one candidate pair.
pub fn verify_candidate(
    db: &MapDatabase,
    current_kf: KeyframeId,
    candidate: Candidate,
    params: &DetectionParams,
) -> Result<LoopClosureReport, Rejection> {
    let graph = db.graph();
    let loop_kf = candidate.keyframe;
    let (Some(current), Some(cand)) = (db.keyframe(current_kf), db.keyframe(loop_kf)) else {
        return Err(Rejection::EmptyMatch);
    };
    let (Ok(g_c), Ok(g_l)) = (graph.subgraph_for(current_kf), graph.subgraph_for(loop_kf)) else {
        return Err(Rejection::EmptyMatch);
    };
    let match_set = match_vertices(graph, &g_c, &g_l, current_kf, loop_kf, params.tau_as, params.tau_n)?;
    let seed = candidate_seed(params.ransac_seed, current_kf, loop_kf);
    let coarse = coarse_sim3(graph, &match_set, current, cand, params, seed)?;
    let edge_score = edge_test(
        &g_c,
        &g_l,
        &match_set,
        params.tau_e,
        params.skip_edge_test_without_edges,
    )?;
    let refined = refine_sim3(current, cand, &coarse.transform, params, seed.wrapping_add(1))?;
    let report = LoopClosureReport {
        current_kf,
        loop_kf,
        bow_score: candidate.score,
        match_set,
        coarse,
        edge_score,
        refined: refined.transform,
        refine_inliers: refined.inliers,
        point_matches: refined.point_matches,
    };
    debug_assert!(report_is_consistent(&report, params));
    Ok(report)
}

/// Checks every threshold a report must have passed.
pub fn report_is_consistent(r: &LoopClosureReport, p: &DetectionParams) -> bool {
    let edges_ok = r.edge_score > p.tau_e || (p.skip_edge_test_without_edges && r.edge_score == 0.0);
    r.match_set.average_score >= p.tau_as
        && r.match_set.matches.iter().all(|m| m.score >= p.tau_n)
        && p.count_passes(r.coarse.inlier_count)
        && p.ratio_passes(r.coarse.inlier_ratio)
        && edges_ok
        && r.refine_inliers >= p.refine_min_inliers as usize
}

fn verify_in_order(
    db: &MapDatabase,
    current_kf: KeyframeId,
    candidates: &[Candidate],
    params: &DetectionParams,
) -> (Option<LoopClosureReport>, Vec<CandidateRejection>) {
    let mut rejections = Vec::new();
    for &c in candidates {
        match verify_candidate(db, current_kf, c, params) {
            Ok(report) => {
                debug!(current = %current_kf, candidate = %c.keyframe, "loop accepted");
                return (Some(report), rejections);
            }
            Err(rejection) => {
                let stage = rejection.stage();
                debug!(current = %current_kf, candidate = %c.keyframe, ?stage, ?rejection, "candidate rejected");
                rejections.push(CandidateRejection {
                    loop_kf: c.keyframe,
                    stage,
                    rejection,
                });
            }
        }
    }
    (None, rejections)
}

/// Single-query detection without temporal consistency: every BoW candidate
/// is verified in order and the first one passing all stages is reported.
pub fn detect_loop(db: &MapDatabase, current_kf: KeyframeId, params: &DetectionParams) -> Option<LoopClosureReport> {
    detect_loop_traced(db, current_kf, params).report
}

pub fn detect_loop_traced(db: &MapDatabase, current_kf: KeyframeId, params: &DetectionParams) -> DetectionTrace {
    let s_min = min_score_threshold(db, current_kf, params.s_min_floor);
    let raw = raw_candidates(db, current_kf, s_min, params.min_kf_gap);
    let (report, rejections) = verify_in_order(db, current_kf, &raw, params);
    DetectionTrace {
        current_kf,
        s_min,
        verified: raw.clone(),
        raw_candidates: raw,
        rejections,
        report,
    }
}

/// Online detector: call [`LoopDetector::process`] once per new keyframe, in
/// id order, after integrating it into the database.
#[derive(Debug, Clone)]
pub struct LoopDetector {
    params: DetectionParams,
    consistency: TemporalConsistency,
}

impl LoopDetector {
    pub fn new(params: DetectionParams) -> Self {
        Self {
            consistency: TemporalConsistency::new(params.temporal_consistency_len),
            params,
        }
    }

    pub fn params(&self) -> &DetectionParams {
        &self.params
    }

    /// BoW candidates for `current_kf` that have passed temporal consistency.
    pub fn candidate_keyframes(
        &mut self,
        db: &MapDatabase,
        current_kf: KeyframeId,
    ) -> (f64, Vec<Candidate>, Vec<Candidate>) {
        let s_min = min_score_threshold(db, current_kf, self.params.s_min_floor);
        let raw = raw_candidates(db, current_kf, s_min, self.params.min_kf_gap);
        let consistent = self.consistency.update(db, &raw);
        (s_min, raw, consistent)
    }

    pub fn process(&mut self, db: &MapDatabase, current_kf: KeyframeId) -> DetectionTrace {
        let (s_min, raw, verified) = self.candidate_keyframes(db, current_kf);
        let (report, rejections) = verify_in_order(db, current_kf, &verified, &self.params);
        DetectionTrace {
            current_kf,
            s_min,
            raw_candidates: raw,
            verified,
            rejections,
            report,
        }
    }
}
