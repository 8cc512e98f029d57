//! Evaluation metrics between an estimated flow and ground truth.
//!
//! Six fields: end-point error, strict and relaxed accuracy, outlier ratio,
//! angle error, and inference time (filled by the caller that timed the
//! solve). Accuracy and outlier clauses use strict inequalities, so boundary
//! values fall outside the accurate/outlier sets.

use crate::cloud::FlowField;
use crate::error::{Error, Result};

/// Guard for the relative-error denominator: a point with zero ground-truth
/// flow and nonzero error gets a huge relative error, so the relative clauses
/// never rescue it.
const EPS_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMetrics {
    /// Mean end-point error, meters.
    pub epe: f64,
    /// Percent of points with absolute error < 0.05 m or relative error < 0.05.
    pub acc5: f64,
    /// Percent of points with absolute error < 0.1 m or relative error < 0.1.
    pub acc10: f64,
    /// Percent of points with absolute error > 0.3 m or relative error > 0.1.
    pub outliers: f64,
    /// Mean angle error, radians.
    pub angle_error: f64,
    /// Wall time of the estimation, milliseconds.
    pub time_ms: f64,
}

/// How the per-point angle error is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleMode {
    /// Angle between `(est, 1)` and `(gt, 1)`: the homogeneous augmentation
    /// regularizes zero-magnitude vectors.
    Homogeneous,
    /// Angle between the raw 3D vectors with an epsilon-guarded denominator.
    Raw,
}

/// Angle between two 4-vectors via the numerically stable half-angle form;
/// exactly zero for identical inputs.
fn vector_angle(a: [f64; 4], b: [f64; 4]) -> f64 {
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3])
        .sqrt()
        .max(EPS_REL);
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2] + b[3] * b[3])
        .sqrt()
        .max(EPS_REL);
    let mut diff = 0.0;
    let mut sum = 0.0;
    for i in 0..4 {
        let u = a[i] / na;
        let v = b[i] / nb;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Per-point comparison of estimated and ground-truth flow.
pub fn evaluate(est: &FlowField, gt: &FlowField) -> Result<FlowMetrics> {
    evaluate_with(est, gt, AngleMode::Homogeneous)
}

pub fn evaluate_with(est: &FlowField, gt: &FlowField, angle: AngleMode) -> Result<FlowMetrics> {
    if est.is_empty() || gt.is_empty() {
        return Err(Error::EmptyFlow);
    }
    if est.len() != gt.len() {
        return Err(Error::SizeMismatch {
            expected: gt.len(),
            got: est.len(),
        });
    }
    let n = est.len() as f64;
    let mut epe = 0.0;
    let mut acc5 = 0usize;
    let mut acc10 = 0usize;
    let mut outliers = 0usize;
    let mut angle_sum = 0.0;
    for (e, g) in est.vectors().iter().zip(gt.vectors()) {
        let d = [e[0] - g[0], e[1] - g[1], e[2] - g[2]];
        let err = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let gt_norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let rel = err / gt_norm.max(EPS_REL);
        epe += err;
        if err < 0.05 || rel < 0.05 {
            acc5 += 1;
        }
        if err < 0.1 || rel < 0.1 {
            acc10 += 1;
        }
        if err > 0.3 || rel > 0.1 {
            outliers += 1;
        }
        angle_sum += match angle {
            AngleMode::Homogeneous => {
                vector_angle([e[0], e[1], e[2], 1.0], [g[0], g[1], g[2], 1.0])
            }
            AngleMode::Raw => vector_angle([e[0], e[1], e[2], 0.0], [g[0], g[1], g[2], 0.0]),
        };
    }
    Ok(FlowMetrics {
        epe: epe / n,
        acc5: 100.0 * acc5 as f64 / n,
        acc10: 100.0 * acc10 as f64 / n,
        outliers: 100.0 * outliers as f64 / n,
        angle_error: angle_sum / n,
        time_ms: 0.0,
    })
}

/// Unweighted mean of each field across samples.
pub fn aggregate(per_sample: &[FlowMetrics]) -> Result<FlowMetrics> {
    if per_sample.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = per_sample.len() as f64;
    let mut out = FlowMetrics {
        epe: 0.0,
        acc5: 0.0,
        acc10: 0.0,
        outliers: 0.0,
        angle_error: 0.0,
        time_ms: 0.0,
    };
    for m in per_sample {
        out.epe += m.epe;
        out.acc5 += m.acc5;
        out.acc10 += m.acc10;
        out.outliers += m.outliers;
        out.angle_error += m.angle_error;
        out.time_ms += m.time_ms;
    }
    out.epe /= n;
    out.acc5 /= n;
    out.acc10 /= n;
    out.outliers /= n;
    out.angle_error /= n;
    out.time_ms /= n;
    Ok(out)
}

/// CSV header matching [`csv_row`].
pub const CSV_HEADER: &str = "sample_id,epe,acc5,acc10,outliers,angle,time_ms";

/// One CSV row: `sample_id, epe, acc5, acc10, outliers, angle, time_ms`.
pub fn csv_row(sample_id: &str, m: &FlowMetrics) -> String {
    format!(
        "{sample_id},{:.9},{:.6},{:.6},{:.6},{:.9},{:.3}",
        m.epe, m.acc5, m.acc10, m.outliers, m.angle_error, m.time_ms
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn flow_from(v: Vec<[f64; 3]>) -> FlowField {
        FlowField::new(v).unwrap()
    }

    #[test]
    fn identical_flows_are_perfect() {
        let f = flow_from(vec![[0.5, -0.3, 0.1], [1.0, 0.0, 0.0]]);
        let m = evaluate(&f, &f).unwrap();
        assert_eq!(m.epe, 0.0);
        assert_eq!(m.acc5, 100.0);
        assert_eq!(m.acc10, 100.0);
        assert_eq!(m.outliers, 0.0);
        assert_eq!(m.angle_error, 0.0);
    }

    #[test]
    fn relative_clause_rescues_large_flows() {
        // e = 0.08 >= 0.05 but e' = 0.04 < 0.05: counts toward acc5.
        let gt = flow_from(vec![[2.0, 0.0, 0.0]]);
        let est = flow_from(vec![[2.08, 0.0, 0.0]]);
        let m = evaluate(&est, &gt).unwrap();
        assert_eq!(m.acc5, 100.0);
        assert_eq!(m.acc10, 100.0);
        assert_eq!(m.outliers, 0.0);
    }

    #[test]
    fn boundary_values_are_strict() {
        // Binary-exact constructions so boundaries land exactly.
        // e = 0.25 exactly, |gt| = 5.0, rel = 0.05 exactly: both acc5
        // clauses are strict, so the point is not acc5-accurate, while
        // rel = 0.05 < 0.1 keeps it acc10-accurate.
        let gt = flow_from(vec![[5.0, 0.0, 0.0]]);
        let est = flow_from(vec![[5.25, 0.0, 0.0]]);
        let m = evaluate(&est, &gt).unwrap();
        assert_eq!(m.acc5, 0.0);
        assert_eq!(m.acc10, 100.0);
        assert_eq!(m.outliers, 0.0);

        // e = 0.25, |gt| = 2.5, rel = 0.1 exactly: not > 0.1, so not an
        // outlier; also exactly at the acc10 boundary, so not accurate.
        let gt2 = flow_from(vec![[2.5, 0.0, 0.0]]);
        let est2 = flow_from(vec![[2.75, 0.0, 0.0]]);
        let m2 = evaluate(&est2, &gt2).unwrap();
        assert_eq!(m2.outliers, 0.0);
        assert_eq!(m2.acc10, 0.0);

        // Absolute boundary e = 0.3 exactly (gt zero-adjacent is avoided by a
        // large gt so the relative clause stays quiet): not > 0.3.
        let gt3 = flow_from(vec![[8.0, 0.0, 0.0]]);
        let est3 = flow_from(vec![[8.0, 0.3, 0.0]]);
        let m3 = evaluate(&est3, &gt3).unwrap();
        // e = 0.3 exactly is not > 0.3, rel = 0.0375 is not > 0.1.
        assert_eq!(m3.outliers, 0.0);
    }

    #[test]
    fn zero_gt_flow_is_never_rescued_by_relative_error() {
        let gt = flow_from(vec![[0.0, 0.0, 0.0]]);
        let est = flow_from(vec![[0.2, 0.0, 0.0]]);
        let m = evaluate(&est, &gt).unwrap();
        assert_eq!(m.acc5, 0.0);
        assert_eq!(m.acc10, 0.0);
        assert_eq!(m.outliers, 100.0);
    }

    #[test]
    fn matches_per_point_oracle_on_random_flows() {
        // Scalar oracle values computed point by point, independently of the
        // vectorized path above.
        let mut rng = Rng::new(77);
        for _ in 0..10 {
            let n = 10;
            let gt: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.uniform_in(-1.0, 1.0),
                        rng.uniform_in(-1.0, 1.0),
                        rng.uniform_in(-0.3, 0.3),
                    ]
                })
                .collect();
            let est: Vec<[f64; 3]> = gt
                .iter()
                .map(|g| {
                    [
                        g[0] + rng.uniform_in(-0.2, 0.2),
                        g[1] + rng.uniform_in(-0.2, 0.2),
                        g[2] + rng.uniform_in(-0.2, 0.2),
                    ]
                })
                .collect();
            let m = evaluate(&flow_from(est.clone()), &flow_from(gt.clone())).unwrap();

            let mut epe = 0.0;
            let mut acc5 = 0.0;
            let mut acc10 = 0.0;
            let mut outl = 0.0;
            let mut ang = 0.0;
            for i in 0..n {
                let dx = est[i][0] - gt[i][0];
                let dy = est[i][1] - gt[i][1];
                let dz = est[i][2] - gt[i][2];
                let e = (dx * dx + dy * dy + dz * dz).sqrt();
                let gn =
                    (gt[i][0] * gt[i][0] + gt[i][1] * gt[i][1] + gt[i][2] * gt[i][2]).sqrt();
                let rel = e / gn.max(1e-9);
                epe += e / n as f64;
                if e < 0.05 || rel < 0.05 {
                    acc5 += 100.0 / n as f64;
                }
                if e < 0.1 || rel < 0.1 {
                    acc10 += 100.0 / n as f64;
                }
                if e > 0.3 || rel > 0.1 {
                    outl += 100.0 / n as f64;
                }
                // Same half-angle definition, written out per point.
                let na = (est[i][0] * est[i][0]
                    + est[i][1] * est[i][1]
                    + est[i][2] * est[i][2]
                    + 1.0)
                    .sqrt();
                let nb = (gn * gn + 1.0).sqrt();
                let ua = [est[i][0] / na, est[i][1] / na, est[i][2] / na, 1.0 / na];
                let ub = [gt[i][0] / nb, gt[i][1] / nb, gt[i][2] / nb, 1.0 / nb];
                let mut diff = 0.0;
                let mut sum = 0.0;
                for k in 0..4 {
                    diff += (ua[k] - ub[k]) * (ua[k] - ub[k]);
                    sum += (ua[k] + ub[k]) * (ua[k] + ub[k]);
                }
                ang += 2.0 * diff.sqrt().atan2(sum.sqrt()) / n as f64;
            }
            assert!((m.epe - epe).abs() < 1e-12);
            assert!((m.acc5 - acc5).abs() < 1e-12);
            assert!((m.acc10 - acc10).abs() < 1e-12);
            assert!((m.outliers - outl).abs() < 1e-12);
            assert!((m.angle_error - ang).abs() < 1e-12);
        }
    }

    #[test]
    fn acc5_never_exceeds_acc10() {
        let mut rng = Rng::new(13);
        for _ in 0..50 {
            let n = 1 + rng.below(20);
            let gt: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.uniform_in(-2.0, 2.0),
                        rng.uniform_in(-2.0, 2.0),
                        rng.uniform_in(-2.0, 2.0),
                    ]
                })
                .collect();
            let est: Vec<[f64; 3]> = gt
                .iter()
                .map(|g| {
                    [
                        g[0] + rng.uniform_in(-0.5, 0.5),
                        g[1] + rng.uniform_in(-0.5, 0.5),
                        g[2] + rng.uniform_in(-0.5, 0.5),
                    ]
                })
                .collect();
            let m = evaluate(&flow_from(est), &flow_from(gt)).unwrap();
            assert!(m.acc5 <= m.acc10);
        }
    }

    #[test]
    fn joint_permutation_leaves_metrics_unchanged() {
        let mut rng = Rng::new(14);
        let n = 16;
        let gt: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
            .collect();
        let est: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
            .collect();
        let m1 = evaluate(&flow_from(est.clone()), &flow_from(gt.clone())).unwrap();
        let rev_est: Vec<_> = est.into_iter().rev().collect();
        let rev_gt: Vec<_> = gt.into_iter().rev().collect();
        let m2 = evaluate(&flow_from(rev_est), &flow_from(rev_gt)).unwrap();
        assert!((m1.epe - m2.epe).abs() < 1e-12);
        assert_eq!(m1.acc5, m2.acc5);
        assert_eq!(m1.acc10, m2.acc10);
        assert_eq!(m1.outliers, m2.outliers);
        assert!((m1.angle_error - m2.angle_error).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_fieldwise_mean() {
        let a = FlowMetrics {
            epe: 0.1,
            acc5: 50.0,
            acc10: 60.0,
            outliers: 10.0,
            angle_error: 0.2,
            time_ms: 100.0,
        };
        let b = FlowMetrics {
            epe: 0.3,
            acc5: 70.0,
            acc10: 80.0,
            outliers: 20.0,
            angle_error: 0.4,
            time_ms: 300.0,
        };
        let m = aggregate(&[a, b]).unwrap();
        assert!((m.epe - 0.2).abs() < 1e-15);
        assert!((m.acc5 - 60.0).abs() < 1e-12);
        assert!((m.time_ms - 200.0).abs() < 1e-12);
        assert_eq!(aggregate(&[a]).unwrap(), a);
        assert!(matches!(aggregate(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = flow_from(vec![[0.0; 3]]);
        let b = flow_from(vec![[0.0; 3], [1.0; 3]]);
        assert!(matches!(
            evaluate(&a, &b),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
