//! Trend tests and paired comparisons over run outputs.

use crate::error::{Error, Result};

/// Spearman rank correlation result.
#[derive(Debug, Clone, Copy)]
pub struct TrendResult {
    pub spearman_rho: f64,
    pub n: usize,
}

impl TrendResult {
    pub fn direction(&self) -> &'static str {
        if self.spearman_rho > 0.0 {
            "increasing"
        } else if self.spearman_rho < 0.0 {
            "decreasing"
        } else {
            "flat"
        }
    }
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<TrendResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            a: xs.len(),
            b: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::LengthMismatch {
            a: xs.len(),
            b: 3,
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    let denom = (vx * vy).sqrt();
    let rho = if denom == 0.0 { 0.0 } else { cov / denom };
    Ok(TrendResult {
        spearman_rho: rho,
        n: xs.len(),
    })
}

/// Whether larger values of a metric field are better.
pub fn higher_is_better(field: &str) -> bool {
    matches!(field, "acc5" | "acc10")
}

/// Paired per-sample comparison of one metric between two runs.
#[derive(Debug, Clone)]
pub struct PairedComparison {
    /// Per-sample `a - b` deltas, in id order of `a`.
    pub deltas: Vec<f64>,
    /// Samples where run `a` strictly beats run `b`.
    pub wins: usize,
    pub mean_delta: f64,
}

/// Compares runs sample by sample. `a` and `b` map sample id to the metric
/// value; both must cover the same ids.
pub fn paired_compare(
    field: &str,
    a: &[(String, f64)],
    b: &[(String, f64)],
) -> Result<PairedComparison> {
    if a.len() != b.len() {
        return Err(Error::IdMismatch(format!(
            "{} samples vs {}",
            a.len(),
            b.len()
        )));
    }
    let bmap: std::collections::HashMap<&str, f64> =
        b.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    let better = higher_is_better(field);
    let mut deltas = Vec::with_capacity(a.len());
    let mut wins = 0usize;
    for (id, va) in a {
        let vb = bmap
            .get(id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("sample {id} missing from run b")))?;
        let d = va - vb;
        if (better && d > 0.0) || (!better && d < 0.0) {
            wins += 1;
        }
        deltas.push(d);
    }
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    Ok(PairedComparison {
        deltas,
        wins,
        mean_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_monotone_correlations() {
        let xs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * 10.0 + 1.0).collect();
        assert!((spearman(&xs, &ys).unwrap().spearman_rho - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((spearman(&xs, &neg).unwrap().spearman_rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_case_matches_hand_ranks() {
        // xs: [1, 2, 2, 3, 3, 3, 4, 5] -> ranks [1, 2.5, 2.5, 5, 5, 5, 7, 8]
        // ys: [10, 20, 20, 20, 30, 30, 40, 50] -> ranks [1, 3, 3, 3, 5.5, 5.5, 7, 8]
        let xs = vec![1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0];
        let ys = vec![10.0, 20.0, 20.0, 20.0, 30.0, 30.0, 40.0, 50.0];
        let rx = [1.0, 2.5, 2.5, 5.0, 5.0, 5.0, 7.0, 8.0];
        let ry = [1.0, 3.0, 3.0, 3.0, 5.5, 5.5, 7.0, 8.0];
        // Pearson on the hand ranks:
        let n = 8.0;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..8 {
            cov += (rx[i] - mx) * (ry[i] - my);
            vx += (rx[i] - mx).powi(2);
            vy += (ry[i] - my).powi(2);
        }
        let expected = cov / (vx * vy).sqrt();
        let got = spearman(&xs, &ys).unwrap().spearman_rho;
        assert!((got - expected).abs() < 1e-12, "{got} vs hand {expected}");
    }

    #[test]
    fn invariant_under_strictly_monotone_transform() {
        let xs = vec![0.3, 1.7, 0.9, 2.4, 5.5, 4.1];
        let ys = vec![9.0, 3.0, 7.0, 2.0, 1.0, 2.5];
        let base = spearman(&xs, &ys).unwrap().spearman_rho;
        let xs_t: Vec<f64> = xs.iter().map(|x| (x * 3.0 + 1.0).exp()).collect();
        let ys_t: Vec<f64> = ys.iter().map(|y| y.powi(3)).collect();
        let t = spearman(&xs_t, &ys_t).unwrap().spearman_rho;
        assert!((base - t).abs() < 1e-12);
    }

    #[test]
    fn length_checks() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    fn run(vals: &[(&str, f64)]) -> Vec<(String, f64)> {
        vals.iter().map(|(s, v)| (s.to_string(), *v)).collect()
    }

    #[test]
    fn identical_runs_have_zero_deltas_and_no_wins() {
        let a = run(&[("s0", 0.1), ("s1", 0.2)]);
        let c = paired_compare("epe", &a, &a).unwrap();
        assert_eq!(c.wins, 0);
        assert_eq!(c.mean_delta, 0.0);
        assert!(c.deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn strictly_better_everywhere_wins_all() {
        let a = run(&[("s0", 0.1), ("s1", 0.2), ("s2", 0.3)]);
        let b = run(&[("s0", 0.2), ("s1", 0.3), ("s2", 0.4)]);
        let c = paired_compare("epe", &a, &b).unwrap();
        assert_eq!(c.wins, 3);
        // For accuracy-like fields the direction flips.
        let c2 = paired_compare("acc5", &a, &b).unwrap();
        assert_eq!(c2.wins, 0);
    }

    #[test]
    fn mixed_case_matches_hand_count() {
        // epe deltas: -0.05 (win), +0.1 (loss), 0.0 (tie) -> 1 win.
        let a = run(&[("s0", 0.10), ("s1", 0.30), ("s2", 0.20)]);
        let b = run(&[("s0", 0.15), ("s1", 0.20), ("s2", 0.20)]);
        let c = paired_compare("epe", &a, &b).unwrap();
        assert_eq!(c.wins, 1);
        assert!((c.mean_delta - (-0.05 + 0.1 + 0.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn id_mismatch_rejected() {
        let a = run(&[("s0", 0.1)]);
        let b = run(&[("s9", 0.1)]);
        assert!(matches!(
            paired_compare("epe", &a, &b),
            Err(Error::IdMismatch(_))
        ));
    }
}
