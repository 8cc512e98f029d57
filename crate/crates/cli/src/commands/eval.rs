//! `eval`: metrics between an estimated flow and a sample's ground truth,
//! single-sample or aggregated over a directory of runs.

use std::path::Path;

use anyhow::{Context, Result};
use sceneflow_core::io::{read_flow, read_sample};
use sceneflow_core::metrics::{aggregate, csv_row, evaluate, FlowMetrics, CSV_HEADER};

use crate::common::{list_sample_dirs, report_total_ms, write_text, UsageError};

fn sample_id(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn eval_one(est: &Path, sample_dir: &Path, time_ms: f64) -> Result<FlowMetrics> {
    let flow = read_flow(est).with_context(|| format!("reading {}", est.display()))?;
    let sample = read_sample(sample_dir)
        .with_context(|| format!("reading sample {}", sample_dir.display()))?;
    let mut m = evaluate(&flow, &sample.gt_flow)?;
    m.time_ms = time_ms;
    Ok(m)
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    est: Option<&Path>,
    sample: Option<&Path>,
    report: Option<&Path>,
    est_dir: Option<&Path>,
    samples: Option<&Path>,
    out: &Path,
) -> Result<()> {
    match (est, sample, est_dir, samples) {
        (Some(est), Some(sample), None, None) => {
            let time_ms = match report {
                Some(rp) => report_total_ms(rp)?,
                None => 0.0,
            };
            let m = eval_one(est, sample, time_ms)?;
            let mut csv = String::from(CSV_HEADER);
            csv.push('\n');
            csv.push_str(&csv_row(&sample_id(sample), &m));
            csv.push('\n');
            write_text(out, &csv)
        }
        (None, None, Some(est_dir), Some(samples)) => {
            let dirs = list_sample_dirs(samples)?;
            let mut rows = Vec::new();
            let mut all = Vec::new();
            for dir in &dirs {
                let id = sample_id(dir);
                let est = est_dir.join(format!("{id}.pcf"));
                if !est.exists() {
                    anyhow::bail!("missing estimate {} for sample {id}", est.display());
                }
                let m = eval_one(&est, dir, 0.0)?;
                rows.push(csv_row(&id, &m));
                all.push(m);
            }
            let mean = aggregate(&all)?;
            let mut csv = String::from(CSV_HEADER);
            csv.push('\n');
            for r in rows {
                csv.push_str(&r);
                csv.push('\n');
            }
            csv.push_str(&csv_row("mean", &mean));
            csv.push('\n');
            write_text(out, &csv)
        }
        _ => Err(UsageError(
            "eval takes either --est with --sample, or --est-dir with --samples".into(),
        )
        .into()),
    }
}
