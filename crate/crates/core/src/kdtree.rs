//! Exact nearest-neighbor index over a point cloud.
//!
//! A static kd-tree. Queries return the exact nearest point under Euclidean
//! distance; ties break by lowest point index so downstream losses and tests
//! are deterministic. The index is immutable after build and safe for
//! concurrent read-only queries.

use crate::cloud::{dist2, PointCloud, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Node {
    /// Index into the original cloud.
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

const NIL: i32 = -1;

/// Spatial index answering exact 1-NN queries.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
    root: i32,
}

impl NnIndex {
    /// Builds the index. Errors on an empty cloud.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let points = cloud.points().to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_rec(&points, &mut order, &mut nodes);
        Ok(NnIndex {
            points,
            nodes,
            root,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact nearest point to `q` and its Euclidean distance.
    #[inline]
    pub fn nearest(&self, q: Vec3) -> (Vec3, f64) {
        let (idx, d2) = self.nearest_idx(q);
        (self.points[idx], d2.sqrt())
    }

    /// Exact nearest point index and squared distance. Ties break by lowest index.
    pub fn nearest_idx(&self, q: Vec3) -> (usize, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(self.root, q, &mut best);
        (best.0 as usize, best.1)
    }

    fn search(&self, node: i32, q: Vec3, best: &mut (u32, f64)) {
        if node == NIL {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let d2 = dist2(q, p);
        if d2 < best.1 || (d2 == best.1 && n.point < best.0) {
            *best = (n.point, d2);
        }
        let axis = n.axis as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, best);
        // The far side may hold an equal-distance point with a lower index,
        // so prune only on strict inequality.
        if diff * diff <= best.1 {
            self.search(far, q, best);
        }
    }
}

fn build_rec(points: &[Vec3], order: &mut [u32], nodes: &mut Vec<Node>) -> i32 {
    if order.is_empty() {
        return NIL;
    }
    // Split along the widest axis of this subset.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut axis = 0;
    for a in 1..3 {
        if hi[a] - lo[a] > hi[axis] - lo[axis] {
            axis = a;
        }
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ka = (points[a as usize][axis], a);
        let kb = (points[b as usize][axis], b);
        ka.partial_cmp(&kb).expect("finite coordinates")
    });
    let point = order[mid];
    let slot = nodes.len();
    nodes.push(Node {
        point,
        axis: axis as u8,
        left: NIL,
        right: NIL,
    });
    let (left_half, rest) = order.split_at_mut(mid);
    let right_half = &mut rest[1..];
    let left = build_rec(points, left_half, nodes);
    let right = build_rec(points, right_half, nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    slot as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent oracle: exhaustive linear scan with the same tie rule.
    fn linear_scan(points: &[Vec3], q: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = dist2(q, *p);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }

    fn random_cloud(rng: &mut Rng, n: usize) -> PointCloud {
        let pts = (0..n)
            .map(|_| {
                [
                    rng.uniform_in(-5.0, 5.0),
                    rng.uniform_in(-5.0, 5.0),
                    rng.uniform_in(-2.0, 2.0),
                ]
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn two_point_geometry() {
        let cloud = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        let (p, d) = idx.nearest([0.2, 0.0, 0.0]);
        assert_eq!(p, [0.0; 3]);
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn singleton() {
        let cloud = PointCloud::new(vec![[3.0, -1.0, 2.0]]).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        let (p, _) = idx.nearest([100.0, 100.0, 100.0]);
        assert_eq!(p, [3.0, -1.0, 2.0]);
    }

    #[test]
    fn query_at_indexed_point_has_zero_distance() {
        let cloud = PointCloud::new(vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        let (_, d) = idx.nearest([4.0, 5.0, 6.0]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn duplicated_points_return_lowest_index() {
        let p = [1.0, 1.0, 1.0];
        let cloud = PointCloud::new(vec![[0.0; 3], p, p, p]).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        let (i, _) = idx.nearest_idx([1.1, 1.0, 1.0]);
        assert_eq!(i, 1);
    }

    #[test]
    fn symmetric_tie_breaks_by_index() {
        // Query equidistant from both points.
        let cloud = PointCloud::new(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        let (i, _) = idx.nearest_idx([0.0, 3.0, 0.0]);
        assert_eq!(i, 0);
    }

    #[test]
    fn matches_linear_scan_on_random_clouds() {
        let mut rng = Rng::new(99);
        let cloud = random_cloud(&mut rng, 64);
        let idx = NnIndex::build(&cloud).unwrap();
        for _ in 0..64 {
            let q = [
                rng.uniform_in(-6.0, 6.0),
                rng.uniform_in(-6.0, 6.0),
                rng.uniform_in(-3.0, 3.0),
            ];
            let (oi, od2) = linear_scan(cloud.points(), q);
            let (ki, kd2) = idx.nearest_idx(q);
            assert_eq!(ki, oi);
            assert_eq!(kd2.to_bits(), od2.to_bits(), "distance must be bit-equal");
        }
    }

    #[test]
    fn matches_linear_scan_across_sizes() {
        let mut rng = Rng::new(7);
        for n in [1usize, 2, 3, 5, 17, 64, 131, 256] {
            let cloud = random_cloud(&mut rng, n);
            let idx = NnIndex::build(&cloud).unwrap();
            for _ in 0..32 {
                let q = [
                    rng.uniform_in(-6.0, 6.0),
                    rng.uniform_in(-6.0, 6.0),
                    rng.uniform_in(-3.0, 3.0),
                ];
                let (oi, od2) = linear_scan(cloud.points(), q);
                let (ki, kd2) = idx.nearest_idx(q);
                assert_eq!(ki, oi, "n={n}");
                assert_eq!(kd2.to_bits(), od2.to_bits());
            }
        }
    }

    #[test]
    fn tie_rule_on_grid_lattice() {
        // Lattice queries sit exactly between points; the lowest index wins.
        let mut pts = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                pts.push([x as f64, y as f64, 0.0]);
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let idx = NnIndex::build(&cloud).unwrap();
        for qx in 0..3 {
            for qy in 0..3 {
                let q = [qx as f64 + 0.5, qy as f64 + 0.5, 0.0];
                let (oi, _) = linear_scan(cloud.points(), q);
                let (ki, _) = idx.nearest_idx(q);
                assert_eq!(ki, oi);
            }
        }
    }

    #[test]
    fn build_rejects_empty() {
        let res = PointCloud::new(vec![]);
        assert!(res.is_err());
    }
}
