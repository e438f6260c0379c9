//! Ingested keyframe records and their per-object / per-point observations.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::BowVector;
use crate::geometry::{CameraModel, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyframeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkId(pub u64);

impl std::fmt::Display for KeyframeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One detected object in a keyframe.
///
/// `center` and `axes` are the front-end's 3D estimates expressed in the
/// keyframe's (possibly drifted) map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    /// Map landmark the detection was associated with by the front-end, if any.
    pub landmark: Option<LandmarkId>,
    /// Ground-truth physical object, evaluation only.
    pub gt_object: Option<u32>,
    pub center_px: Vector2<f64>,
    pub center: Vector3<f64>,
    pub axes: [f64; 3],
    pub class_scores: Vec<f64>,
    pub patch_bow: BowVector,
}

/// One map point seen in a keyframe with its visual-word descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointObservation {
    pub point: u64,
    pub position: Vector3<f64>,
    pub pixel: Vector2<f64>,
    pub word: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeRecord {
    pub id: KeyframeId,
    pub est_pose: Pose,
    pub gt_pose: Pose,
    pub camera: CameraModel,
    pub object_obs: Vec<ObjectObservation>,
    pub point_obs: Vec<PointObservation>,
    pub frame_bow: BowVector,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("keyframe {0}: object observation {1} lies outside the image")]
    PixelOutOfBounds(KeyframeId, usize),
    #[error("keyframe {0}: frame BoW vector is empty")]
    EmptyFrameBow(KeyframeId),
    #[error("keyframe {0}: object observation {1} has non-positive axes")]
    InvalidAxes(KeyframeId, usize),
}

impl KeyframeRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        for (i, obs) in self.object_obs.iter().enumerate() {
            if !self.camera.contains(&obs.center_px) {
                return Err(RecordError::PixelOutOfBounds(self.id, i));
            }
            if obs.axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(RecordError::InvalidAxes(self.id, i));
            }
        }
        if self.frame_bow.l1_norm() <= 0.0 {
            return Err(RecordError::EmptyFrameBow(self.id));
        }
        Ok(())
    }

    pub fn point(&self, point: u64) -> Option<&PointObservation> {
        self.point_obs.iter().find(|p| p.point == point)
    }
}
