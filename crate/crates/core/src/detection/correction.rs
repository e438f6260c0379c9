//! Spreading a loop correction over the trajectory.

use thiserror::Error;

use crate::geometry::{Pose, Sim3};
use crate::keyframe::KeyframeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectionError {
    #[error("keyframe {0} is not in the trajectory")]
    KeyframeNotInTrajectory(KeyframeId),
    #[error("loop keyframe {loop_kf} does not precede current keyframe {current_kf}")]
    InvalidOrder {
        loop_kf: KeyframeId,
        current_kf: KeyframeId,
    },
}

/// Applies `correction` (current frame to loop frame) with weight
/// `(k - loop) / (current - loop)` between the two keyframes: poses up to
/// the loop keyframe are unchanged, the current keyframe and everything after
/// it receive the full correction.
pub fn apply_correction(
    trajectory: &[(KeyframeId, Pose)],
    loop_kf: KeyframeId,
    current_kf: KeyframeId,
    correction: &Sim3,
) -> Result<Vec<(KeyframeId, Pose)>, CorrectionError> {
    for kf in [loop_kf, current_kf] {
        if !trajectory.iter().any(|(id, _)| *id == kf) {
            return Err(CorrectionError::KeyframeNotInTrajectory(kf));
        }
    }
    if loop_kf >= current_kf {
        return Err(CorrectionError::InvalidOrder { loop_kf, current_kf });
    }
    let span = (current_kf.0 - loop_kf.0) as f64;
    Ok(trajectory
        .iter()
        .map(|&(id, pose)| {
            if id <= loop_kf {
                return (id, pose);
            }
            let alpha = ((id.0 - loop_kf.0) as f64 / span).min(1.0);
            let partial = if alpha >= 1.0 {
                *correction
            } else {
                correction.interpolate(alpha)
            };
            (id, partial.transform_pose(&pose))
        })
        .collect())
}
