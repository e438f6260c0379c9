//! Ground-truth loop labels, precision/recall and trajectory error.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::LoopClosureReport;
use crate::geometry::{horn_sim3, Pose};
use crate::keyframe::{KeyframeId, KeyframeRecord};

/// Labeling thresholds used throughout the evaluation.
pub const LABEL_MAX_DISTANCE_M: f64 = 1.0;
pub const LABEL_MAX_ANGLE_DEG: f64 = 53.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLoopLabel {
    pub kf_a: KeyframeId,
    pub kf_b: KeyframeId,
    pub positional_diff: f64,
    pub angular_diff: f64,
}

/// Every pair of keyframes whose true poses are closer than `pos_thresh_m`,
/// differ in viewing direction by less than `ang_thresh_deg` and whose ids are
/// at least `min_gap` apart.
pub fn label_ground_truth_loops(
    seq: &[KeyframeRecord],
    pos_thresh_m: f64,
    ang_thresh_deg: f64,
    min_gap: u64,
) -> Vec<GroundTruthLoopLabel> {
    let mut out = Vec::new();
    for (i, a) in seq.iter().enumerate() {
        for b in &seq[i + 1..] {
            if b.id.0.abs_diff(a.id.0) < min_gap {
                continue;
            }
            let positional_diff = (a.gt_pose.translation() - b.gt_pose.translation()).norm();
            if positional_diff >= pos_thresh_m {
                continue;
            }
            let angular_diff = a.gt_pose.viewing_angle_deg(&b.gt_pose);
            if angular_diff < ang_thresh_deg {
                let (kf_a, kf_b) = if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) };
                out.push(GroundTruthLoopLabel {
                    kf_a,
                    kf_b,
                    positional_diff,
                    angular_diff,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub detections: usize,
    pub true_positives: usize,
    pub labeled_loops: usize,
    /// 1 when there are no detections.
    pub precision: f64,
    /// 1 when there are no labeled loops.
    pub recall: f64,
    pub ate_before_cm: Option<f64>,
    pub ate_after_cm: Option<f64>,
}

fn ordered(a: KeyframeId, b: KeyframeId) -> (KeyframeId, KeyframeId) {
    (a.min(b), a.max(b))
}

/// Precision and recall of detected `(current, loop)` pairs against labels,
/// ignoring pair order.
pub fn evaluate_pairs(detections: &[(KeyframeId, KeyframeId)], labels: &[GroundTruthLoopLabel]) -> EvaluationReport {
    let truth: BTreeSet<_> = labels.iter().map(|l| ordered(l.kf_a, l.kf_b)).collect();
    let true_positives = detections
        .iter()
        .filter(|&&(a, b)| truth.contains(&ordered(a, b)))
        .count();
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    EvaluationReport {
        detections: detections.len(),
        true_positives,
        labeled_loops: truth.len(),
        precision: ratio(true_positives, detections.len()),
        recall: ratio(true_positives, truth.len()),
        ate_before_cm: None,
        ate_after_cm: None,
    }
}

pub fn evaluate(detections: &[LoopClosureReport], labels: &[GroundTruthLoopLabel]) -> EvaluationReport {
    let pairs: Vec<_> = detections.iter().map(|r| (r.current_kf, r.loop_kf)).collect();
    evaluate_pairs(&pairs, labels)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AteError {
    #[error("trajectories differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 poses, got {0}")]
    TooShort(usize),
    #[error("trajectory positions are degenerate")]
    Degenerate,
}

/// Per-pose position residuals in meters after similarity-aligning `est` to `gt`.
pub fn aligned_errors(est: &[Pose], gt: &[Pose]) -> Result<Vec<f64>, AteError> {
    if est.len() != gt.len() {
        return Err(AteError::LengthMismatch(est.len(), gt.len()));
    }
    if est.len() < 3 {
        return Err(AteError::TooShort(est.len()));
    }
    let src: Vec<Vector3<f64>> = est.iter().map(|p| *p.translation()).collect();
    let dst: Vec<Vector3<f64>> = gt.iter().map(|p| *p.translation()).collect();
    let align = horn_sim3(&src, &dst).map_err(|_| AteError::Degenerate)?;
    Ok(src.iter().zip(&dst).map(|(s, d)| (align.apply(s) - d).norm()).collect())
}

/// Absolute trajectory error in centimeters.
pub fn ate_rmse(est: &[Pose], gt: &[Pose]) -> Result<f64, AteError> {
    let errs = aligned_errors(est, gt)?;
    let ms = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
    Ok(100.0 * ms.sqrt())
}
