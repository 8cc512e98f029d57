//! `ablate`: method grids over a sample directory, one CSV row per variant
//! with metrics averaged over samples.

use std::path::Path;

use anyhow::{Context, Result};
use sceneflow_core::io::read_sample;
use sceneflow_core::metrics::{aggregate, evaluate, FlowMetrics};
use sceneflow_core::mnsf::{run_ablation, AblationSuite};

use crate::common::{list_sample_dirs, load_config, write_text};
use crate::Suite;

pub fn run(
    suite: Suite,
    samples: &Path,
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let suite = match suite {
        Suite::Components => AblationSuite::Components,
        Suite::FusionArch => AblationSuite::FusionArch,
        Suite::FusionDepth => AblationSuite::FusionDepth,
        Suite::Frames => AblationSuite::Frames,
    };
    let dirs = list_sample_dirs(samples)?;
    // variant name -> per-sample metrics, in first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut per_variant: std::collections::HashMap<String, Vec<FlowMetrics>> =
        std::collections::HashMap::new();
    for dir in &dirs {
        let sample =
            read_sample(dir).with_context(|| format!("reading sample {}", dir.display()))?;
        let rows = run_ablation(&sample, &cfg.mnsf, suite)?;
        for row in rows {
            let mut m = evaluate(&row.flow, &sample.gt_flow)?;
            m.time_ms = row.wall_ms;
            if !per_variant.contains_key(&row.name) {
                order.push(row.name.clone());
            }
            per_variant.entry(row.name).or_default().push(m);
        }
    }
    let mut csv = String::from("variant,epe,acc5,acc10,outliers,angle,time_ms\n");
    for name in &order {
        let mean = aggregate(&per_variant[name])?;
        csv.push_str(&format!(
            "{name},{:.9},{:.6},{:.6},{:.6},{:.9},{:.3}\n",
            mean.epe, mean.acc5, mean.acc10, mean.outliers, mean.angle_error, mean.time_ms
        ));
    }
    write_text(out, &csv)
}
