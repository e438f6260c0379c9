use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PLACEMENT_RETRIES: usize = 1000;
const TWIN_STREAM: u64 = 0x7417;
const RESTYLE_STREAM: u64 = 0x5e57;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("placed only {placed} of {requested} objects")]
    PlacementFailure { placed: usize, requested: usize },
    #[error("invalid world spec: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub object_count: usize,
    pub class_count: usize,
    /// Room size in meters; x and y are centered on the origin, z starts at 0.
    pub room_extent: [f64; 3],
    pub axes_range: (f64, f64),
    pub word_vocab_size: u32,
    pub words_per_object: usize,
    pub background_point_count: usize,
    /// Objects keep their centers at least this far (horizontally) from the
    /// room's vertical center line.
    pub keep_out_radius: f64,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            object_count: 30,
            class_count: 10,
            room_extent: [10.0, 10.0, 3.0],
            axes_range: (0.3, 1.2),
            word_vocab_size: 5000,
            words_per_object: 20,
            background_point_count: 800,
            keep_out_radius: 2.0,
            seed: 0,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.class_count == 0 {
            return Err(WorldError::InvalidSpec("class_count must be positive"));
        }
        if self.room_extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(WorldError::InvalidSpec("room extent must be positive"));
        }
        let (lo, hi) = self.axes_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(WorldError::InvalidSpec("axes range must satisfy 0 < min <= max"));
        }
        if self.word_vocab_size == 0 || self.words_per_object == 0 {
            return Err(WorldError::InvalidSpec("vocabulary and word counts must be positive"));
        }
        if self.words_per_object > self.word_vocab_size as usize {
            return Err(WorldError::InvalidSpec("words_per_object exceeds the vocabulary"));
        }
        if self.keep_out_radius.is_nan() || self.keep_out_radius < 0.0 {
            return Err(WorldError::InvalidSpec("keep_out_radius must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: u32,
    pub class: u32,
    pub center: Vector3<f64>,
    /// Descending.
    pub axes: [f64; 3],
    pub words: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub id: u64,
    pub position: Vector3<f64>,
    pub word: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub spec: WorldSpec,
    pub room_min: Vector3<f64>,
    pub room_max: Vector3<f64>,
    pub objects: Vec<WorldObject>,
    pub points: Vec<WorldPoint>,
}

impl World {
    pub fn room_center(&self) -> Vector3<f64> {
        (self.room_min + self.room_max) / 2.0
    }

    pub fn height(&self) -> f64 {
        self.room_max.z - self.room_min.z
    }

    /// Whether a viewer at height `z` is on this world's floor.
    pub fn contains_height(&self, z: f64) -> bool {
        z >= self.room_min.z && z <= self.room_max.z
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.room_min[i] - 1e-9 && p[i] <= self.room_max[i] + 1e-9)
    }
}

fn sample_words(rng: &mut impl Rng, vocab: u32, count: usize) -> Vec<u32> {
    let mut w: Vec<u32> = sample(rng, vocab as usize, count)
        .into_iter()
        .map(|x| x as u32)
        .collect();
    w.sort_unstable();
    w
}

fn sorted_desc(mut a: [f64; 3]) -> [f64; 3] {
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

fn spaced(center: &Vector3<f64>, major: f64, others: &[WorldObject], skip: Option<usize>) -> bool {
    others
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .all(|(_, o)| (o.center - center).norm() >= 0.5 * (o.axes[0] + major))
}

fn sample_center(rng: &mut impl Rng, min: &Vector3<f64>, max: &Vector3<f64>, major: f64) -> Vector3<f64> {
    let half = 0.5 * major;
    let mut c = Vector3::zeros();
    for i in 0..3 {
        let (lo, hi) = (min[i] + half, max[i] - half);
        c[i] = if lo < hi {
            rng.random_range(lo..hi)
        } else {
            0.5 * (min[i] + max[i])
        };
    }
    c
}

/// Deterministic room with non-overlapping objects and background points on
/// its walls, floor and ceiling.
pub fn generate_world(spec: &WorldSpec) -> Result<World, WorldError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [ex, ey, ez] = spec.room_extent;
    let room_min = Vector3::new(-ex / 2.0, -ey / 2.0, 0.0);
    let room_max = Vector3::new(ex / 2.0, ey / 2.0, ez);

    let mut objects: Vec<WorldObject> = Vec::with_capacity(spec.object_count);
    for id in 0..spec.object_count {
        let (lo, hi) = spec.axes_range;
        let axes = sorted_desc([0; 3].map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo }));
        let class = rng.random_range(0..spec.class_count as u32);
        let words = sample_words(&mut rng, spec.word_vocab_size, spec.words_per_object);
        let mut placed = None;
        for _ in 0..PLACEMENT_RETRIES {
            let c = sample_center(&mut rng, &room_min, &room_max, axes[0]);
            let horizontal = c.x.hypot(c.y);
            if horizontal >= spec.keep_out_radius + 0.5 * axes[0] && spaced(&c, axes[0], &objects, None) {
                placed = Some(c);
                break;
            }
        }
        let Some(center) = placed else {
            return Err(WorldError::PlacementFailure {
                placed: id,
                requested: spec.object_count,
            });
        };
        objects.push(WorldObject {
            id: id as u32,
            class,
            center,
            axes,
            words,
        });
    }

    let faces = [
        (ey * ez, 0usize, room_min.x),
        (ey * ez, 0, room_max.x),
        (ex * ez, 1, room_min.y),
        (ex * ez, 1, room_max.y),
        (ex * ey, 2, room_min.z),
        (ex * ey, 2, room_max.z),
    ];
    let total: f64 = faces.iter().map(|f| f.0).sum();
    let points = (0..spec.background_point_count)
        .map(|id| {
            let mut pick = rng.random_range(0.0..total);
            let mut face = faces[5];
            for f in faces {
                if pick < f.0 {
                    face = f;
                    break;
                }
                pick -= f.0;
            }
            let mut p = Vector3::zeros();
            for i in 0..3 {
                p[i] = if i == face.1 {
                    face.2
                } else {
                    rng.random_range(room_min[i]..room_max[i])
                };
            }
            WorldPoint {
                id: id as u64,
                position: p,
                word: rng.random_range(0..spec.word_vocab_size),
            }
        })
        .collect();

    Ok(World {
        spec: spec.clone(),
        room_min,
        room_max,
        objects,
        points,
    })
}

/// A copy of `base` stacked directly above it: same layout and background,
/// with exactly `round(perturbation * n)` objects jittered in position and
/// size and given fresh word sets. Object and point ids are offset so they
/// stay unique across both worlds.
pub fn twin_of(base: &World, perturbation: f64) -> World {
    let p = perturbation.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(base.spec.seed);
    rng.set_stream(TWIN_STREAM);
    let n = base.objects.len();
    let k = ((p * n as f64).round() as usize).min(n);
    let mut chosen: Vec<usize> = sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();

    let mut twin = base.clone();
    let (lo, hi) = base.spec.axes_range;
    for &i in &chosen {
        let obj = twin.objects[i].clone();
        let axes = sorted_desc(obj.axes.map(|a| (a * rng.random_range(0.8..1.25)).clamp(lo, hi)));
        let mut center = obj.center;
        for _ in 0..50 {
            let mut c = obj.center + Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
            for d in 0..3 {
                c[d] = c[d].clamp(base.room_min[d] + axes[0] / 2.0, base.room_max[d] - axes[0] / 2.0);
            }
            if spaced(&c, axes[0], &twin.objects, Some(i)) {
                center = c;
                break;
            }
        }
        twin.objects[i].center = center;
        twin.objects[i].axes = if spaced(&center, axes[0], &twin.objects, Some(i)) {
            axes
        } else {
            obj.axes
        };
        twin.objects[i].words = sample_words(&mut rng, base.spec.word_vocab_size, base.spec.words_per_object);
    }

    let lift = Vector3::new(0.0, 0.0, base.height());
    twin.room_min += lift;
    twin.room_max += lift;
    let obj_offset = base.objects.iter().map(|o| o.id + 1).max().unwrap_or(0);
    let point_offset = base.points.iter().map(|p| p.id + 1).max().unwrap_or(0);
    for o in &mut twin.objects {
        o.center += lift;
        o.id += obj_offset;
    }
    for pt in &mut twin.points {
        pt.position += lift;
        pt.id += point_offset;
    }
    twin
}

/// Generates a world and its perturbed twin.
pub fn generate_twin_world(spec: &WorldSpec, perturbation: f64) -> Result<(World, World), WorldError> {
    let a = generate_world(spec)?;
    let b = twin_of(&a, perturbation);
    Ok((a, b))
}

/// Redecorates every object: replaces `round(fraction * words)` of each
/// object's words with words it did not have before.
pub fn restyle(world: &World, fraction: f64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(world.spec.seed);
    rng.set_stream(RESTYLE_STREAM);
    let vocab = world.spec.word_vocab_size;
    let mut out = world.clone();
    for obj in &mut out.objects {
        let n = obj.words.len();
        let k = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
        let drop: Vec<usize> = sample(&mut rng, n, k).into_vec();
        let mut kept: Vec<u32> = obj
            .words
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, w)| *w)
            .collect();
        let free = (vocab as usize).saturating_sub(n);
        let mut added = 0;
        while added < k && free > 0 {
            let w = rng.random_range(0..vocab);
            if !obj.words.contains(&w) && !kept.contains(&w) {
                kept.push(w);
                added += 1;
            }
        }
        kept.sort_unstable();
        obj.words = kept;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, count: usize) -> WorldSpec {
        WorldSpec {
            object_count: count,
            keep_out_radius: 0.0,
            background_point_count: 50,
            seed,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            generate_world(&small(3, 10)).unwrap(),
            generate_world(&small(3, 10)).unwrap()
        );
        assert_ne!(
            generate_world(&small(3, 10)).unwrap(),
            generate_world(&small(4, 10)).unwrap()
        );
    }

    #[test]
    fn empty_room_has_only_points() {
        let w = generate_world(&small(1, 0)).unwrap();
        assert!(w.objects.is_empty());
        assert_eq!(w.points.len(), 50);
    }

    #[test]
    fn objects_inside_and_spaced() {
        let w = generate_world(&small(7, 10)).unwrap();
        assert_eq!(w.objects.len(), 10);
        for (i, a) in w.objects.iter().enumerate() {
            assert!(w.contains(&a.center));
            assert!(a.axes[0] >= a.axes[1] && a.axes[1] >= a.axes[2] && a.axes[2] > 0.0);
            for b in &w.objects[i + 1..] {
                assert!((a.center - b.center).norm() >= 0.5 * (a.axes[0] + b.axes[0]));
            }
        }
        assert!(w.points.iter().all(|p| w.contains(&p.position)));
    }

    #[test]
    fn overfull_room_fails() {
        let spec = WorldSpec {
            room_extent: [2.0, 2.0, 2.0],
            axes_range: (1.0, 1.0),
            ..small(0, 50)
        };
        assert!(matches!(
            generate_world(&spec),
            Err(WorldError::PlacementFailure { .. })
        ));
    }

    #[test]
    fn twin_perturbs_exact_count() {
        let a = generate_world(&small(2, 10)).unwrap();
        let changed = |b: &World| {
            a.objects
                .iter()
                .zip(&b.objects)
                .filter(|(x, y)| x.words != y.words)
                .count()
        };
        assert_eq!(changed(&twin_of(&a, 0.0)), 0);
        assert_eq!(changed(&twin_of(&a, 0.2)), 2);
        assert_eq!(changed(&twin_of(&a, 1.0)), 10);
    }

    #[test]
    fn twin_is_stacked_with_fresh_ids() {
        let (a, b) = generate_twin_world(&small(2, 10), 0.0).unwrap();
        assert_eq!(b.room_min.z, a.room_max.z);
        for (x, y) in a.objects.iter().zip(&b.objects) {
            assert!((y.center - x.center - Vector3::new(0.0, 0.0, 3.0)).norm() < 1e-12);
            assert_eq!(x.words, y.words);
            assert_ne!(x.id, y.id);
        }
        assert!(b.points.iter().all(|p| p.id >= 50));
    }

    #[test]
    fn restyle_replaces_fraction_of_words() {
        let a = generate_world(&small(5, 6)).unwrap();
        let r = restyle(&a, 0.75);
        for (x, y) in a.objects.iter().zip(&r.objects) {
            assert_eq!(y.words.len(), x.words.len());
            let shared = y.words.iter().filter(|w| x.words.contains(w)).count();
            assert_eq!(shared, 5);
        }
    }
}
