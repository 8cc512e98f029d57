//! Shared helpers for the criterion benchmarks.

use sceneflow_core::{PointCloud, Rng, Vec3};

/// Uniform random cloud in a box sized for lidar-scale scenes.
pub fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = Rng::new(seed);
    let pts: Vec<Vec3> = (0..n)
        .map(|_| {
            [
                rng.uniform_in(-8.0, 8.0),
                rng.uniform_in(-8.0, 8.0),
                rng.uniform_in(0.0, 3.0),
            ]
        })
        .collect();
    PointCloud::new(pts).unwrap()
}
