//! Self-supervised neural scene flow for point clouds.
//!
//! Estimates per-point 3D motion between lidar-style point cloud frames by
//! optimizing a freshly initialized coordinate network per sample against a
//! correspondence-free loss (truncated Chamfer or a distance-transform grid),
//! with a multi-frame scheme that fuses forward and inverted backward flows.

pub mod analysis;
pub mod cloud;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod loss;
pub mod metrics;
pub mod mnsf;
pub mod nn;
pub mod rng;
pub mod solver;
pub mod synth;

pub use cloud::{warp, Aabb, FlowField, PointCloud, Vec3};
pub use error::{Error, Result};
pub use kdtree::NnIndex;
pub use rng::Rng;
