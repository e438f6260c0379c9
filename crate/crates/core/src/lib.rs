//! Object-level loop closure detection over a semantic covisibility graph.

pub mod assignment;
pub mod descriptors;
pub mod detection;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod keyframe;
pub mod map;
pub mod sim;

pub use assignment::{max_weight_matching, AssignmentError, Matching, ScoreMatrix};
pub use descriptors::{bhattacharyya, l1_similarity, pair_similarity, BowVector, ClassDistribution, DescriptorError};
pub use detection::{
    apply_correction, detect_loop, detect_loop_traced, DetectionParams, DetectionTrace, LoopClosureReport,
    LoopDetector, Rejection, Stage,
};
pub use geometry::{horn_sim3, project, unproject, CameraModel, GeometryError, Pose, Sim3};
pub use graph::{adjacency_matrix, CovisibilityGraph, CovisibilitySubgraph, GraphError, ObjectLandmark};
pub use harness::{Scenario, Simulation};
pub use keyframe::{KeyframeId, KeyframeRecord, LandmarkId, ObjectObservation, PointObservation, RecordError};
pub use map::{MapDatabase, MapError};
pub use sim::{DriftJump, DriftModel, ObservationNoise, Rendered, Sensor, World, WorldSpec};
