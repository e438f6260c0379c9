//! Seeded inputs shared by the benchmarks.

use covisloop::{ScoreMatrix, Sim3};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points and their image under a random similarity.
pub fn point_pairs(n: usize, seed: u64) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = |r: f64| {
        Vector3::new(
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        )
    };
    let rot = UnitQuaternion::from_scaled_axis(v(1.5));
    let s = Sim3::new(1.3, rot, v(5.0)).expect("positive scale");
    let src: Vec<_> = (0..n).map(|_| v(5.0)).collect();
    let dst = src.iter().map(|p| s.apply(p)).collect();
    (src, dst)
}

pub fn score_matrix(rows: usize, cols: usize, seed: u64) -> ScoreMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
    ScoreMatrix::new(rows, cols, data).expect("scores in range")
}
