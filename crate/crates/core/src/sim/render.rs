use std::collections::BTreeMap;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::World;
use crate::descriptors::BowVector;
use crate::geometry::{CameraModel, Pose, Sim3, MIN_DEPTH};
use crate::keyframe::{KeyframeId, KeyframeRecord, LandmarkId, ObjectObservation, PointObservation};

const DRIFT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Word emitted as the frame descriptor when nothing at all is visible.
pub const BLANK_WORD: u32 = u32::MAX;

/// Per-keyframe random walk of the estimated map frame, plus an optional
/// one-off jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    pub translation_rw_sigma: f64,
    pub rotation_rw_sigma: f64,
    pub scale_rw_sigma: f64,
    pub jump: Option<DriftJump>,
}

/// A single odometry failure at a fraction of the trajectory, pivoting on the
/// camera center like the random-walk steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftJump {
    pub at_fraction: f64,
    pub scale: f64,
    pub yaw_deg: f64,
    pub translation: [f64; 3],
}

impl DriftJump {
    fn step_index(&self, len: usize) -> usize {
        (self.at_fraction.clamp(0.0, 1.0) * len.saturating_sub(2) as f64).round() as usize
    }

    fn about(&self, c: &Vector3<f64>) -> Sim3 {
        let r = crate::geometry::rot_z(self.yaw_deg.to_radians());
        let s = self.scale;
        Sim3::new(s, r, c - s * (r * c) + Vector3::from(self.translation)).expect("jump scale must be positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationNoise {
    pub pixel_sigma: f64,
    pub class_confusion_rate: f64,
    pub bow_word_dropout: f64,
    pub detection_dropout: f64,
    /// Relative depth error of back-projected centers and points.
    pub depth_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sensor {
    pub camera: CameraModel,
    pub max_range: f64,
    /// An object unseen for more than this many keyframes is tracked as a new
    /// landmark when it reappears.
    pub reacquire_gap: usize,
}

impl Default for Sensor {
    fn default() -> Self {
        Self {
            camera: CameraModel::new(525.0, 525.0, 319.5, 239.5, 640, 480).expect("valid camera"),
            max_range: 8.0,
            reacquire_gap: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub keyframes: Vec<KeyframeRecord>,
    /// Map from true world coordinates into each keyframe's estimated frame.
    pub drift: Vec<Sim3>,
}

impl Rendered {
    /// Transform taking keyframe `current`'s estimated frame into keyframe
    /// `earlier`'s.
    pub fn relative_drift(&self, current: usize, earlier: usize) -> Sim3 {
        self.drift[earlier].compose(&self.drift[current].inverse())
    }
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"))
}

fn draw(rng: &mut impl Rng, dist: &Option<Normal<f64>>) -> f64 {
    dist.as_ref().map_or(0.0, |d| d.sample(rng))
}

fn drift_walk(trajectory: &[Pose], model: &DriftModel, seed: u64) -> Vec<Sim3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DRIFT_STREAM);
    let (nt, nr, ns) = (
        normal(model.translation_rw_sigma),
        normal(model.rotation_rw_sigma),
        normal(model.scale_rw_sigma),
    );
    let mut out = Vec::with_capacity(trajectory.len());
    let mut acc = Sim3::identity();
    for (k, pose) in trajectory.iter().enumerate() {
        out.push(acc);
        if k + 1 == trajectory.len() {
            break;
        }
        let t = Vector3::from_fn(|_, _| draw(&mut rng, &nt));
        let w = Vector3::from_fn(|_, _| draw(&mut rng, &nr));
        let s = draw(&mut rng, &ns).exp();
        let r = UnitQuaternion::from_scaled_axis(w);
        // Step error pivots on the true camera center, like odometry error.
        let c = pose.translation();
        let step = Sim3::new(s, r, c - s * (r * c) + t).expect("positive scale");
        acc = acc.compose(&step);
        if let Some(j) = model.jump.filter(|j| j.step_index(trajectory.len()) == k) {
            acc = acc.compose(&j.about(c));
        }
    }
    out
}

struct Tracker {
    gap: usize,
    next: u64,
    tracks: BTreeMap<(usize, usize), (LandmarkId, usize)>,
}

impl Tracker {
    fn id(&mut self, key: (usize, usize), frame: usize) -> LandmarkId {
        let fresh = match self.tracks.get(&key) {
            Some(&(id, last)) if frame - last <= self.gap => Some(id),
            _ => None,
        };
        let id = fresh.unwrap_or_else(|| {
            self.next += 1;
            LandmarkId(self.next - 1)
        });
        self.tracks.insert(key, (id, frame));
        id
    }
}

/// Renders keyframes along `trajectory` through `worlds`.
///
/// An item is visible when the camera is on its world's floor, it lies in
/// front of the camera within `sensor.max_range`, and both its true and noisy
/// pixels fall inside the image. Estimates are expressed in the drifted
/// frame of each keyframe.
pub fn render_sequence(
    worlds: &[World],
    trajectory: &[Pose],
    sensor: &Sensor,
    drift: &DriftModel,
    noise: &ObservationNoise,
    seed: u64,
) -> Rendered {
    let drifts = drift_walk(trajectory, drift, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let npx = normal(noise.pixel_sigma);
    let ndepth = normal(noise.depth_sigma);
    let cam = &sensor.camera;
    let class_count = worlds.first().map_or(1, |w| w.spec.class_count).max(1);
    let mut tracker = Tracker {
        gap: sensor.reacquire_gap,
        next: 0,
        tracks: BTreeMap::new(),
    };

    let mut keyframes = Vec::with_capacity(trajectory.len());
    for (k, (gt_pose, d)) in trajectory.iter().zip(&drifts).enumerate() {
        let est_pose = d.transform_pose(gt_pose);
        let observe = |rng: &mut ChaCha8Rng, p_world: &Vector3<f64>| -> Option<(Vector2<f64>, Vector3<f64>)> {
            let p_cam = gt_pose.world_to_camera(p_world);
            if p_cam.z <= MIN_DEPTH || p_cam.norm() > sensor.max_range {
                return None;
            }
            let px = cam.project_camera(&p_cam).ok()?;
            if !cam.contains(&px) {
                return None;
            }
            let noisy = px + Vector2::new(draw(rng, &npx), draw(rng, &npx));
            if !cam.contains(&noisy) {
                return None;
            }
            let depth = p_cam.z * (1.0 + draw(rng, &ndepth)).max(0.1);
            let est = est_pose.camera_to_world(&(d.scale() * cam.unproject_camera(&noisy, depth)));
            Some((noisy, est))
        };

        let mut object_obs = Vec::new();
        let mut point_obs = Vec::new();
        let mut frame_bow = BowVector::new();
        let z = gt_pose.translation().z;
        for (wi, world) in worlds.iter().enumerate() {
            if !world.contains_height(z) {
                continue;
            }
            for (oi, obj) in world.objects.iter().enumerate() {
                let Some((center_px, center)) = observe(&mut rng, &obj.center) else {
                    continue;
                };
                if rng.random::<f64>() < noise.detection_dropout {
                    continue;
                }
                let mut class = obj.class as usize % class_count;
                if class_count > 1 && rng.random::<f64>() < noise.class_confusion_rate {
                    class = (class + rng.random_range(1..class_count)) % class_count;
                }
                let class_scores: Vec<f64> = (0..class_count)
                    .map(|c| 0.9 * f64::from(u8::from(c == class)) + 0.1 / class_count as f64)
                    .collect();
                let mut patch_bow: BowVector = obj
                    .words
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() >= noise.bow_word_dropout)
                    .collect();
                if patch_bow.is_empty() && !obj.words.is_empty() {
                    patch_bow.add(obj.words[rng.random_range(0..obj.words.len())], 1.0);
                }
                let axes = obj
                    .axes
                    .map(|a| a * d.scale() * (1.0 + draw(&mut rng, &ndepth)).max(0.1));
                frame_bow.accumulate(&patch_bow);
                object_obs.push(ObjectObservation {
                    landmark: Some(tracker.id((wi, oi), k)),
                    gt_object: Some(obj.id),
                    center_px,
                    center,
                    axes,
                    class_scores,
                    patch_bow,
                });
            }
            for pt in &world.points {
                let Some((pixel, position)) = observe(&mut rng, &pt.position) else {
                    continue;
                };
                frame_bow.add(pt.word, 1.0);
                point_obs.push(PointObservation {
                    point: pt.id,
                    position,
                    pixel,
                    word: pt.word,
                });
            }
        }
        if frame_bow.is_empty() {
            frame_bow.add(BLANK_WORD, 1.0);
        }
        keyframes.push(KeyframeRecord {
            id: KeyframeId(k as u64),
            est_pose,
            gt_pose: *gt_pose,
            camera: *cam,
            object_obs,
            point_obs,
            frame_bow,
        });
    }
    Rendered {
        keyframes,
        drift: drifts,
    }
}
