//! Deterministic synthetic scenes, trajectories and keyframe rendering.

mod render;
mod trajectory;
mod world;

pub use render::{render_sequence, DriftJump, DriftModel, ObservationNoise, Rendered, Sensor, BLANK_WORD};
pub use trajectory::{loop_trajectory, outward_pose, TrajectoryKind};
pub use world::{
    generate_twin_world, generate_world, restyle, twin_of, World, WorldError, WorldObject, WorldPoint, WorldSpec,
};
