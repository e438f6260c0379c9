use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::world::World;
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// One closed circle on the world's floor.
    SingleLoop,
    /// A closed circle on the world's floor, then a closed circle on the floor
    /// stacked directly above. The climb between them produces no keyframes.
    TwoFloor,
}

/// Camera at `position` looking horizontally along heading `theta`, image
/// y axis pointing down.
pub fn outward_pose(position: Vector3<f64>, theta: f64) -> Pose {
    let (s, c) = theta.sin_cos();
    let r = Matrix3::from_columns(&[
        Vector3::new(s, -c, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(c, s, 0.0),
    ]);
    Pose::from_matrix(&r, position).expect("rotation is orthonormal")
}

fn circle(center: Vector3<f64>, radius: f64, count: usize) -> impl Iterator<Item = Pose> {
    (0..count).map(move |k| {
        let theta = if count > 1 {
            TAU * k as f64 / (count - 1) as f64
        } else {
            0.0
        };
        outward_pose(center + radius * Vector3::new(theta.cos(), theta.sin(), 0.0), theta)
    })
}

/// Ground-truth keyframe poses. Circles have radius one tenth of the smaller
/// horizontal room extent, run at half room height with the camera looking
/// outward, and end exactly at their start pose.
///
/// # Panics
/// If `keyframe_count < 10`.
pub fn loop_trajectory(world: &World, kind: TrajectoryKind, keyframe_count: usize) -> Vec<Pose> {
    assert!(keyframe_count >= 10, "need at least 10 keyframes");
    let extent = world.room_max - world.room_min;
    let radius = 0.1 * extent.x.min(extent.y);
    let mut center = world.room_center();
    center.z = world.room_min.z + 0.5 * world.height();
    match kind {
        TrajectoryKind::SingleLoop => circle(center, radius, keyframe_count).collect(),
        TrajectoryKind::TwoFloor => {
            let lower = keyframe_count / 2;
            let upper = keyframe_count - lower;
            let h = world.height();
            let mut out: Vec<Pose> = circle(center, radius, lower).collect();
            out.extend(circle(center + Vector3::new(0.0, 0.0, h), radius, upper));
            out
        }
    }
}
