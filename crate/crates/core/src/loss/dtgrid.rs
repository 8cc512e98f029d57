//! Truncated Euclidean distance transform on a voxel grid.
//!
//! The grid is seeded by voxelized target occupancy and filled with the exact
//! squared distance (in voxel units) to the nearest occupied voxel center via
//! separable lower-envelope passes over the three axes, then scaled by the
//! cell size and truncated at `tau`. Loss lookups interpolate trilinearly and
//! differentiate the interpolant as-is; out-of-grid points clamp with zero
//! gradient along the clamped axis.

use rayon::prelude::*;

use super::WarpObjective;
use crate::cloud::{Aabb, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Default cap on voxel count; larger requests fail with `GridTooLarge`.
pub const DEFAULT_VOXEL_CAP: u64 = 50_000_000;

/// Padding margin cap in cells. The margin is `tau` (values farther than
/// `tau` from any target are constant anyway), but an extreme `tau` must not
/// blow up the grid; at the default `tau`/`cell` ratio the cap is inactive.
const MAX_PAD_CELLS: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct DistanceGrid {
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    tau: f64,
    /// Truncated distance at each voxel center, x-fastest ordering.
    values: Vec<f64>,
}

impl DistanceGrid {
    /// Builds the truncated EDT of `target` on a grid covering `bounds`
    /// (expanded to enclose the target) padded by `tau` on every side.
    pub fn build(target: &PointCloud, cell: f64, bounds: &Aabb, tau: f64) -> Result<Self> {
        Self::build_with_cap(target, cell, bounds, tau, DEFAULT_VOXEL_CAP)
    }

    pub fn build_with_cap(
        target: &PointCloud,
        cell: f64,
        bounds: &Aabb,
        tau: f64,
        cap: u64,
    ) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptyCloud);
        }
        assert!(cell > 0.0, "cell size must be positive");
        let region = bounds
            .union(&target.bounds())
            .padded(tau.min(MAX_PAD_CELLS * cell));
        let mut dims = [0usize; 3];
        let mut voxels: u64 = 1;
        for a in 0..3 {
            let extent = (region.max[a] - region.min[a]).max(cell);
            dims[a] = (extent / cell).ceil() as usize;
            voxels = voxels.saturating_mul(dims[a] as u64);
        }
        if voxels > cap {
            return Err(Error::GridTooLarge { voxels, cap });
        }
        let origin = region.min;
        let (nx, ny, nz) = (dims[0], dims[1], dims[2]);

        // Squared distance in voxel units; occupied voxels seed at zero.
        let mut d2 = vec![f64::INFINITY; nx * ny * nz];
        for p in target.points() {
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let i = ((p[a] - origin[a]) / cell).floor() as i64;
                idx[a] = i.clamp(0, dims[a] as i64 - 1) as usize;
            }
            d2[idx[0] + nx * (idx[1] + ny * idx[2])] = 0.0;
        }

        // Separable passes: x rows, then y columns, then z columns.
        let mut line = vec![0.0f64; nx.max(ny).max(nz)];
        let mut out = vec![0.0f64; nx.max(ny).max(nz)];
        for z in 0..nz {
            for y in 0..ny {
                let base = nx * (y + ny * z);
                line[..nx].copy_from_slice(&d2[base..base + nx]);
                lower_envelope_1d(&line[..nx], &mut out[..nx]);
                d2[base..base + nx].copy_from_slice(&out[..nx]);
            }
        }
        for z in 0..nz {
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = d2[x + nx * (y + ny * z)];
                }
                lower_envelope_1d(&line[..ny], &mut out[..ny]);
                for y in 0..ny {
                    d2[x + nx * (y + ny * z)] = out[y];
                }
            }
        }
        for y in 0..ny {
            for x in 0..nx {
                for z in 0..nz {
                    line[z] = d2[x + nx * (y + ny * z)];
                }
                lower_envelope_1d(&line[..nz], &mut out[..nz]);
                for z in 0..nz {
                    d2[x + nx * (y + ny * z)] = out[z];
                }
            }
        }

        let values = d2
            .into_iter()
            .map(|v| (cell * v.sqrt()).min(tau))
            .collect();
        Ok(DistanceGrid {
            origin,
            cell,
            dims,
            tau,
            values,
        })
    }

    #[inline]
    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    #[inline]
    pub fn cell(&self) -> f64 {
        self.cell
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Voxel values in x-fastest order.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value_at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[ix + self.dims[0] * (iy + self.dims[1] * iz)]
    }

    /// Voxel center coordinates.
    pub fn center_of(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.cell,
            self.origin[1] + (iy as f64 + 0.5) * self.cell,
            self.origin[2] + (iz as f64 + 0.5) * self.cell,
        ]
    }

    /// Trilinearly interpolated distance and its gradient at `p`.
    /// Points beyond the voxel-center lattice clamp, with zero derivative
    /// along each clamped axis.
    pub fn sample(&self, p: Vec3) -> (f64, Vec3) {
        let mut i0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut live = [true; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.cell - 0.5;
            let top = (self.dims[a] - 1) as f64;
            let uc = u.clamp(0.0, top);
            if uc != u {
                live[a] = false;
            }
            if self.dims[a] == 1 {
                i0[a] = 0;
                frac[a] = 0.0;
                live[a] = false;
            } else {
                let fl = uc.floor().min(top - 1.0);
                i0[a] = fl as usize;
                frac[a] = uc - fl;
            }
        }
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let c = |dx: usize, dy: usize, dz: usize| -> f64 {
            let dx = if self.dims[0] == 1 { 0 } else { dx };
            let dy = if self.dims[1] == 1 { 0 } else { dy };
            let dz = if self.dims[2] == 1 { 0 } else { dz };
            self.value_at(i0[0] + dx, i0[1] + dy, i0[2] + dz)
        };
        let c000 = c(0, 0, 0);
        let c100 = c(1, 0, 0);
        let c010 = c(0, 1, 0);
        let c110 = c(1, 1, 0);
        let c001 = c(0, 0, 1);
        let c101 = c(1, 0, 1);
        let c011 = c(0, 1, 1);
        let c111 = c(1, 1, 1);

        let c00 = c000 + (c100 - c000) * fx;
        let c10 = c010 + (c110 - c010) * fx;
        let c01 = c001 + (c101 - c001) * fx;
        let c11 = c011 + (c111 - c011) * fx;
        let c0 = c00 + (c10 - c00) * fy;
        let c1 = c01 + (c11 - c01) * fy;
        let value = c0 + (c1 - c0) * fz;

        // Analytic derivative of the trilinear interpolant, chain rule 1/cell.
        let dvdx = ((c100 - c000) * (1.0 - fy) + (c110 - c010) * fy) * (1.0 - fz)
            + ((c101 - c001) * (1.0 - fy) + (c111 - c011) * fy) * fz;
        let dvdy = ((c010 - c000) * (1.0 - fx) + (c110 - c100) * fx) * (1.0 - fz)
            + ((c011 - c001) * (1.0 - fx) + (c111 - c101) * fx) * fz;
        let dvdz = ((c001 - c000) * (1.0 - fx) + (c101 - c100) * fx) * (1.0 - fy)
            + ((c011 - c010) * (1.0 - fx) + (c111 - c110) * fx) * fy;
        let inv = 1.0 / self.cell;
        let grad = [
            if live[0] { dvdx * inv } else { 0.0 },
            if live[1] { dvdy * inv } else { 0.0 },
            if live[2] { dvdz * inv } else { 0.0 },
        ];
        (value, grad)
    }
}

/// 1D squared-distance lower envelope (parabola hull). `f` holds per-cell
/// squared costs (infinite where unseeded); writes `min_v (q - v)^2 + f[v]`.
fn lower_envelope_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    // Hull of parabola roots (v) and boundaries (z).
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let mut s;
        loop {
            let vk = v[k];
            s = ((f[q] + (q * q) as f64) - (f[vk] + (vk * vk) as f64))
                / (2.0 * q as f64 - 2.0 * vk as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !started {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let vk = v[k];
        let d = q as f64 - vk as f64;
        out[q] = d * d + f[vk];
    }
}

/// Distance-transform loss: mean of the interpolated distance raised to
/// `power` (1 or 2), with the analytic gradient at each warped point.
pub fn dt_loss(warped: &PointCloud, grid: &DistanceGrid, power: u32) -> (f64, Vec<Vec3>) {
    debug_assert!(power == 1 || power == 2);
    let n = warped.len() as f64;
    let per_point: Vec<(f64, Vec3)> = warped
        .points()
        .par_iter()
        .map(|&p| {
            let (d, g) = grid.sample(p);
            let (term, scale) = if power == 2 {
                (d * d, 2.0 * d / n)
            } else {
                (d, 1.0 / n)
            };
            (term, [g[0] * scale, g[1] * scale, g[2] * scale])
        })
        .collect();
    let loss = per_point.iter().map(|(t, _)| *t).sum::<f64>() / n;
    let grads = per_point.into_iter().map(|(_, g)| g).collect();
    (loss, grads)
}

/// DT objective with a fixed power, reusable across solver iterations.
pub struct DtObjective {
    pub grid: DistanceGrid,
    pub power: u32,
}

impl WarpObjective for DtObjective {
    fn eval(&self, warped: &[Vec3]) -> (f64, Vec<Vec3>) {
        let cloud = PointCloud::new(warped.to_vec()).expect("warped points are finite");
        dt_loss(&cloud, &self.grid, self.power)
    }
}
