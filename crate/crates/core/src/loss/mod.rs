//! Correspondence-free point distance losses, differentiable with respect to
//! the warped query points: truncated Chamfer distance and a truncated
//! Euclidean distance-transform grid.

mod chamfer;
mod dtgrid;

pub use chamfer::{chamfer, ChamferCfg, ChamferLoss};
pub use dtgrid::{dt_loss, DistanceGrid, DtObjective, DEFAULT_VOXEL_CAP};

use crate::cloud::Vec3;

/// A loss over warped source points. Implementations are immutable after
/// construction and safe to evaluate concurrently over point batches.
///
/// `eval` returns the normalized loss and its gradient with respect to each
/// warped point.
pub trait WarpObjective: Sync {
    fn eval(&self, warped: &[Vec3]) -> (f64, Vec<Vec3>);
}

/// Sums independent objectives over disjoint row ranges of the warped batch.
/// Each part is normalized by its own point count; parts carry equal weight.
pub struct SplitObjective<'a> {
    parts: Vec<(std::ops::Range<usize>, &'a dyn WarpObjective)>,
}

impl<'a> SplitObjective<'a> {
    pub fn new(parts: Vec<(std::ops::Range<usize>, &'a dyn WarpObjective)>) -> Self {
        SplitObjective { parts }
    }
}

impl WarpObjective for SplitObjective<'_> {
    fn eval(&self, warped: &[Vec3]) -> (f64, Vec<Vec3>) {
        let mut loss = 0.0;
        let mut grads = vec![[0.0; 3]; warped.len()];
        for (range, obj) in &self.parts {
            let (part_loss, part_grads) = obj.eval(&warped[range.clone()]);
            loss += part_loss;
            grads[range.clone()].copy_from_slice(&part_grads);
        }
        (loss, grads)
    }
}
