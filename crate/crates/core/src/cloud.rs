//! Point cloud and flow field value types.
//!
//! Coordinates are 64-bit floats internally; the on-disk formats in [`crate::io`]
//! store 32-bit. Clouds carry no ordering or correspondence semantics and
//! distinct clouds may have different sizes.

use crate::error::{Error, Result};

/// A 3D point or vector in meters.
pub type Vec3 = [f64; 3];

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Squared Euclidean distance, summed in fixed x,y,z order so results are
/// bit-reproducible across call sites.
#[inline]
pub fn dist2(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// An unordered set of 3D points sampled from one frame of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(PointCloud { points })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    /// Axis-aligned bounding box of the cloud.
    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for p in &self.points {
            bb.insert(*p);
        }
        bb
    }
}

/// One 3D translation vector per point of a source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    vectors: Vec<Vec3>,
}

impl FlowField {
    pub fn new(vectors: Vec<Vec3>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyFlow);
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(FlowField { vectors })
    }

    /// A zero flow sized for `source`.
    pub fn zeros(source_size: usize) -> Self {
        FlowField {
            vectors: vec![[0.0; 3]; source_size],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    #[inline]
    pub fn vector(&self, i: usize) -> Vec3 {
        self.vectors[i]
    }

    /// Componentwise negation.
    pub fn negated(&self) -> FlowField {
        FlowField {
            vectors: self.vectors.iter().map(|v| scale3(*v, -1.0)).collect(),
        }
    }

    /// Mean Euclidean magnitude of the vectors.
    pub fn mean_magnitude(&self) -> f64 {
        self.vectors.iter().map(|v| norm3(*v)).sum::<f64>() / self.vectors.len() as f64
    }
}

/// Displaces every point of `cloud` by the matching flow vector: `out[i] = cloud[i] + flow[i]`.
pub fn warp(cloud: &PointCloud, flow: &FlowField) -> Result<PointCloud> {
    if cloud.len() != flow.len() {
        return Err(Error::SizeMismatch {
            expected: cloud.len(),
            got: flow.len(),
        });
    }
    let points = cloud
        .points()
        .iter()
        .zip(flow.vectors())
        .map(|(p, f)| add3(*p, *f))
        .collect();
    PointCloud::new(points)
}

/// Axis-aligned box, used for grid bounds and coordinate normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn insert(&mut self, p: Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.insert(other.min);
        out.insert(other.max);
        out
    }

    /// Box expanded by `margin` on every side.
    pub fn padded(&self, margin: f64) -> Aabb {
        Aabb {
            min: [
                self.min[0] - margin,
                self.min[1] - margin,
                self.min[2] - margin,
            ],
            max: [
                self.max[0] + margin,
                self.max[1] + margin,
                self.max[2] + margin,
            ],
        }
    }

    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    /// Half of the largest side length.
    pub fn half_extent(&self) -> f64 {
        let mut h: f64 = 0.0;
        for a in 0..3 {
            h = h.max(0.5 * (self.max[a] - self.min[a]));
        }
        h
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}
