#![allow(dead_code)]

use covisloop::geometry::{project, rot_z};
use covisloop::sim::outward_pose;
use covisloop::{
    BowVector, CameraModel, KeyframeId, KeyframeRecord, LandmarkId, ObjectObservation, PointObservation, Pose, Sensor,
    Sim3,
};
use nalgebra::Vector3;

pub fn camera() -> CameraModel {
    Sensor::default().camera
}

pub fn one_hot(class: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|c| if c == class { 0.9 } else { 0.1 / (n - 1) as f64 })
        .collect()
}

pub fn bow(words: &[(u32, f64)]) -> BowVector {
    let mut b = BowVector::new();
    for &(w, x) in words {
        b.add(w, x);
    }
    b
}

#[derive(Clone)]
pub struct Obj {
    pub landmark: u64,
    pub center: Vector3<f64>,
    pub axes: [f64; 3],
    pub class: usize,
    pub patch: BowVector,
}

/// Camera at height 1.5 looking along +x.
pub fn forward_pose() -> Pose {
    outward_pose(Vector3::new(0.0, 0.0, 1.5), 0.0)
}

pub fn keyframe(
    id: u64,
    pose: Pose,
    objs: &[Obj],
    points: &[(u64, Vector3<f64>, u32)],
    frame_bow: BowVector,
) -> KeyframeRecord {
    let cam = camera();
    let object_obs = objs
        .iter()
        .map(|o| ObjectObservation {
            landmark: Some(LandmarkId(o.landmark)),
            gt_object: None,
            center_px: project(&cam, &pose, &o.center).expect("object in front of the camera"),
            center: o.center,
            axes: o.axes,
            class_scores: one_hot(o.class, 4),
            patch_bow: o.patch.clone(),
        })
        .collect();
    let point_obs = points
        .iter()
        .filter_map(|&(point, position, word)| {
            let pixel = project(&cam, &pose, &position).ok()?;
            cam.contains(&pixel).then_some(PointObservation {
                point,
                position,
                pixel,
                word,
            })
        })
        .collect();
    let rec = KeyframeRecord {
        id: KeyframeId(id),
        est_pose: pose,
        gt_pose: pose,
        camera: cam,
        object_obs,
        point_obs,
        frame_bow,
    };
    rec.validate().expect("fixture keyframe is valid");
    rec
}

/// Five objects spread in front of [`forward_pose`].
pub fn scene_objects() -> Vec<Obj> {
    let spots = [
        (4.0, -1.0, 1.2),
        (4.5, -0.4, 1.8),
        (3.5, 0.1, 1.5),
        (5.0, 0.6, 1.0),
        (4.2, 1.1, 2.0),
    ];
    spots
        .iter()
        .enumerate()
        .map(|(i, &(x, y, z))| Obj {
            landmark: i as u64,
            center: Vector3::new(x, y, z),
            axes: [0.8, 0.5, 0.3],
            class: i % 4,
            patch: bow(&[(100 + i as u32, 1.0), (200 + i as u32, 1.0)]),
        })
        .collect()
}

/// Grid of textured points on a wall five meters ahead of [`forward_pose`].
pub fn wall_points() -> Vec<(u64, Vector3<f64>, u32)> {
    let mut out = Vec::new();
    for i in 0..8 {
        for j in 0..6 {
            let id = (i * 6 + j) as u64;
            let y = -1.6 + 0.45 * i as f64;
            let z = 0.6 + 0.4 * j as f64;
            let x = 5.0 + 0.1 * ((i * 7 + j * 3) % 5) as f64;
            out.push((id, Vector3::new(x, y, z), 1000 + id as u32));
        }
    }
    out
}

/// The transform taking the current keyframe's map frame to the loop
/// keyframe's map frame in the two-view fixtures.
pub fn known_drift() -> Sim3 {
    Sim3::new(1.05, rot_z(0.05), Vector3::new(0.1, -0.05, 0.02)).unwrap()
}

/// Re-expresses loop-frame objects in a drifted current frame, with fresh
/// landmark ids.
pub fn drifted_objects(objs: &[Obj], drift: &Sim3, id_offset: u64) -> Vec<Obj> {
    let inv = drift.inverse();
    objs.iter()
        .map(|o| Obj {
            landmark: o.landmark + id_offset,
            center: inv.apply(&o.center),
            axes: o.axes.map(|a| a / drift.scale()),
            ..o.clone()
        })
        .collect()
}

pub fn drifted_points(points: &[(u64, Vector3<f64>, u32)], drift: &Sim3) -> Vec<(u64, Vector3<f64>, u32)> {
    let inv = drift.inverse();
    points.iter().map(|&(id, p, w)| (id, inv.apply(&p), w)).collect()
}
