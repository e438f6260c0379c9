//! Precision and recall as verification checks are switched on one by one.

use serde::{Deserialize, Serialize};

use crate::detection::{
    average_similarity, candidate_seed, coarse_sim3, edge_test, filter_matches, optimal_matches, DetectionParams,
    LoopDetector,
};
use crate::keyframe::{KeyframeId, KeyframeRecord};
use crate::map::{MapDatabase, MapError};

use super::metrics::{evaluate_pairs, label_ground_truth_loops, LABEL_MAX_ANGLE_DEG, LABEL_MAX_DISTANCE_M};

/// Row labels, cumulative from top to bottom.
pub const ABLATION_ROWS: [&str; 5] = ["none", "+tau_n", "+tau_as", "+tau_e", "+tau_s,tau_eps"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub checks: String,
    pub detections: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub labeled_loops: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn precision_is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].precision >= w[0].precision)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("checks,detections,true_positives,precision,recall\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                r.checks, r.detections, r.true_positives, r.precision, r.recall
            ));
        }
        out
    }
}

/// Which checks one candidate pair survives, in row order after "none".
fn checks_passed(db: &MapDatabase, current_kf: KeyframeId, loop_kf: KeyframeId, params: &DetectionParams) -> [bool; 4] {
    let graph = db.graph();
    let (Some(current), Some(cand)) = (db.keyframe(current_kf), db.keyframe(loop_kf)) else {
        return [false; 4];
    };
    let (Ok(g_c), Ok(g_l)) = (graph.subgraph_for(current_kf), graph.subgraph_for(loop_kf)) else {
        return [false; 4];
    };
    let raw = optimal_matches(graph, &g_c, &g_l, current_kf, loop_kf);
    let set = filter_matches(&raw, params.tau_n);
    if set.is_empty() {
        return [false; 4];
    }
    let average_ok = average_similarity(raw.iter().map(|m| m.score).sum(), raw.len()) >= params.tau_as;
    let edges_ok = edge_test(&g_c, &g_l, &set, params.tau_e, params.skip_edge_test_without_edges).is_ok();
    let seed = candidate_seed(params.ransac_seed, current_kf, loop_kf);
    let coarse_ok = coarse_sim3(graph, &set, current, cand, params, seed).is_ok();
    [true, average_ok, edges_ok, coarse_ok]
}

/// Replays `records` online and scores every stage-one BoW candidate against
/// each cumulative set of checks.
pub fn run_ablation(records: &[KeyframeRecord], params: &DetectionParams) -> Result<AblationTable, MapError> {
    let labels = label_ground_truth_loops(records, LABEL_MAX_DISTANCE_M, LABEL_MAX_ANGLE_DEG, params.min_kf_gap);
    let mut db = MapDatabase::new();
    let mut detector = LoopDetector::new(params.clone());
    let mut survivors: Vec<Vec<(KeyframeId, KeyframeId)>> = vec![Vec::new(); ABLATION_ROWS.len()];
    for rec in records {
        db.integrate(rec.clone())?;
        let (_, raw, _) = detector.candidate_keyframes(&db, rec.id);
        for c in raw {
            let pair = (rec.id, c.keyframe);
            survivors[0].push(pair);
            let passed = checks_passed(&db, rec.id, c.keyframe, params);
            for (row, _) in passed.iter().enumerate().take_while(|(_, ok)| **ok) {
                survivors[row + 1].push(pair);
            }
        }
    }
    let rows = ABLATION_ROWS
        .iter()
        .zip(&survivors)
        .map(|(name, pairs)| {
            let ev = evaluate_pairs(pairs, &labels);
            AblationRow {
                checks: name.to_string(),
                detections: ev.detections,
                true_positives: ev.true_positives,
                precision: ev.precision,
                recall: ev.recall,
            }
        })
        .collect();
    Ok(AblationTable {
        labeled_loops: labels.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_z, Pose};
    use crate::keyframe::KeyframeRecord;
    use crate::sim::BLANK_WORD;
    use nalgebra::Vector3;

    /// Two visits to the same spot with nothing in view: labeled, but no
    /// keyframe has any BoW similarity to offer.
    fn blank_revisit() -> Vec<KeyframeRecord> {
        let cam = crate::sim::Sensor::default().camera;
        (0..60u64)
            .map(|k| {
                let pose = Pose::new(
                    rot_z(0.0),
                    Vector3::new(if k == 0 || k == 59 { 0.0 } else { 10.0 + k as f64 }, 0.0, 0.0),
                );
                let mut bow = crate::descriptors::BowVector::new();
                bow.add(BLANK_WORD - 1 - k as u32, 1.0);
                KeyframeRecord {
                    id: KeyframeId(k),
                    est_pose: pose,
                    gt_pose: pose,
                    camera: cam,
                    object_obs: Vec::new(),
                    point_obs: Vec::new(),
                    frame_bow: bow,
                }
            })
            .collect()
    }

    #[test]
    fn no_candidates_gives_perfect_precision_and_zero_recall() {
        let t = run_ablation(&blank_revisit(), &DetectionParams::default()).unwrap();
        assert_eq!(t.labeled_loops, 1);
        assert_eq!(t.rows.len(), ABLATION_ROWS.len());
        for r in &t.rows {
            assert_eq!((r.detections, r.precision, r.recall), (0, 1.0, 0.0));
        }
        assert!(t.precision_is_monotone());
        assert_eq!(t.to_csv().lines().count(), 6);
    }
}
