//! `bench`: wall-time per method per point count, median of three runs at a
//! fixed iteration budget.

use std::path::Path;

use anyhow::Result;
use sceneflow_core::nn::ModelKind;
use sceneflow_core::solver::{solve_two_frame, LossKind, SolveConfig};
use sceneflow_core::synth::generate;
use sceneflow_core::Rng;

use crate::common::{load_config, parse_usize_list, write_text, UsageError};

fn parse_methods(s: &str) -> Result<Vec<(String, LossKind, ModelKind)>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let name = part.trim();
        let pair = match name {
            "nsfp" => (LossKind::Chamfer, ModelKind::Mlp),
            "nsfp-linear" => (LossKind::Chamfer, ModelKind::LinearPosEnc),
            "fnsf" => (LossKind::Dt, ModelKind::Mlp),
            "fnsf-linear" => (LossKind::Dt, ModelKind::LinearPosEnc),
            other => {
                return Err(UsageError(format!(
                    "--methods: unknown method {other:?} (expected nsfp|nsfp-linear|fnsf|fnsf-linear)"
                ))
                .into())
            }
        };
        out.push((name.to_string(), pair.0, pair.1));
    }
    Ok(out)
}

/// Median wall time of `runs` two-frame solves, milliseconds.
pub fn median_solve_ms(
    source: &sceneflow_core::PointCloud,
    target: &sceneflow_core::PointCloud,
    cfg: &SolveConfig,
    runs: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut times = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut rng = Rng::new(cfg.seed.wrapping_add(r as u64));
        let t0 = std::time::Instant::now();
        let _ = solve_two_frame(source, target, cfg, &mut rng)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((times, sorted[runs / 2]))
}

pub fn run(
    sizes: &str,
    methods: &str,
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let sizes = parse_usize_list(sizes, "sizes")?;
    let methods = parse_methods(methods)?;

    let mut csv = String::from("method,size,run1_ms,run2_ms,run3_ms,median_ms\n");
    for size in &sizes {
        // One scene per size, shared across methods.
        let mut spec = cfg.scene.clone();
        spec.counts = vec![*size];
        let mut rng = Rng::new(cfg.scene.seed).derive(*size as u64);
        let sample = generate(&spec, &mut rng)?;
        let n = sample.frames.len();
        let (s2, s3) = (&sample.frames[n - 2], &sample.frames[n - 1]);
        for (name, loss, model) in &methods {
            let scfg = SolveConfig {
                loss: *loss,
                model: *model,
                max_iters: cfg.bench_iters,
                // The benchmark compares fixed budgets; early stop disabled.
                patience: cfg.bench_iters + 1,
                ..cfg.solve.clone()
            };
            let (times, median) = median_solve_ms(s2, s3, &scfg, 3)?;
            csv.push_str(&format!(
                "{name},{size},{:.3},{:.3},{:.3},{:.3}\n",
                times[0], times[1], times[2], median
            ));
        }
    }
    write_text(out, &csv)
}
