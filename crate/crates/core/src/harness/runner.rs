//! Online replay of a keyframe sequence through map building and detection.

use crate::detection::{apply_correction, DetectionParams, DetectionTrace, LoopClosureReport, LoopDetector};
use crate::geometry::Pose;
use crate::keyframe::{KeyframeId, KeyframeRecord};
use crate::map::{MapDatabase, MapError};

use super::metrics::{
    ate_rmse, evaluate, label_ground_truth_loops, AteError, EvaluationReport, LABEL_MAX_ANGLE_DEG, LABEL_MAX_DISTANCE_M,
};

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub db: MapDatabase,
    pub traces: Vec<DetectionTrace>,
}

impl OnlineRun {
    pub fn reports(&self) -> Vec<LoopClosureReport> {
        self.traces.iter().filter_map(|t| t.report.clone()).collect()
    }

    /// The most recent accepted closure, which spans the longest drift.
    pub fn closing_report(&self) -> Option<&LoopClosureReport> {
        self.traces.iter().rev().find_map(|t| t.report.as_ref())
    }
}

/// Integrates keyframes one at a time and queries the detector after each.
pub fn run_online(records: &[KeyframeRecord], params: &DetectionParams) -> Result<OnlineRun, MapError> {
    let mut db = MapDatabase::new();
    let mut detector = LoopDetector::new(params.clone());
    let mut traces = Vec::with_capacity(records.len());
    for rec in records {
        db.integrate(rec.clone())?;
        traces.push(detector.process(&db, rec.id));
    }
    Ok(OnlineRun { db, traces })
}

pub fn estimated_trajectory(records: &[KeyframeRecord]) -> Vec<(KeyframeId, Pose)> {
    records.iter().map(|r| (r.id, r.est_pose)).collect()
}

/// Precision and recall against ground-truth labels, plus ATE before and
/// after the closure with the latest current keyframe.
pub fn evaluate_sequence(
    records: &[KeyframeRecord],
    reports: &[LoopClosureReport],
    min_kf_gap: u64,
) -> Result<EvaluationReport, AteError> {
    let labels = label_ground_truth_loops(records, LABEL_MAX_DISTANCE_M, LABEL_MAX_ANGLE_DEG, min_kf_gap);
    let mut ev = evaluate(reports, &labels);
    let closing = reports.iter().max_by_key(|r| r.current_kf);
    let (before, after) = ate_before_after(records, closing)?;
    ev.ate_before_cm = Some(before);
    ev.ate_after_cm = Some(after);
    Ok(ev)
}

/// ATE before and after applying `report`'s refined correction to the whole
/// estimated trajectory.
pub fn ate_before_after(
    records: &[KeyframeRecord],
    report: Option<&LoopClosureReport>,
) -> Result<(f64, f64), AteError> {
    let gt: Vec<Pose> = records.iter().map(|r| r.gt_pose).collect();
    let est = estimated_trajectory(records);
    let before_poses: Vec<Pose> = est.iter().map(|p| p.1).collect();
    let before = ate_rmse(&before_poses, &gt)?;
    let after = match report {
        None => before,
        Some(r) => {
            let corrected = apply_correction(&est, r.loop_kf, r.current_kf, &r.refined)
                .expect("report keyframes are in the sequence");
            let poses: Vec<Pose> = corrected.into_iter().map(|p| p.1).collect();
            ate_rmse(&poses, &gt)?
        }
    };
    Ok((before, after))
}
