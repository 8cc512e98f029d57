//! `landscape`: test loss on a grid of parameter perturbations along two
//! random orthonormalized, filter-normalized directions around the converged
//! solution.

use std::path::Path;

use anyhow::{Context, Result};
use ndarray::Array2;
use sceneflow_core::io::read_sample;
use sceneflow_core::loss::WarpObjective;
use sceneflow_core::mnsf::fusion_landscape;
use sceneflow_core::nn::FlowModel;
use sceneflow_core::solver::{build_objective, eval_objective, solve_two_frame};
use sceneflow_core::{Rng, Vec3};

use crate::common::{load_config, write_text};
use crate::LandscapeMethod;

/// Two random directions, orthonormalized globally, then rescaled per
/// parameter tensor to match the tensor's norm. Zero-norm tensors are left
/// unperturbed.
fn directions(model: &FlowModel, rng_seed: u64) -> (Vec<f64>, Vec<f64>) {
    let theta = model.params_to_vec();
    let p = theta.len();
    let mut rng1 = Rng::new(rng_seed).derive(7001);
    let mut rng2 = Rng::new(rng_seed).derive(7002);
    let mut d1: Vec<f64> = (0..p).map(|_| rng1.gauss()).collect();
    let mut d2: Vec<f64> = (0..p).map(|_| rng2.gauss()).collect();
    // Gram-Schmidt then unit norms.
    let dot: f64 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
    let n1sq: f64 = d1.iter().map(|a| a * a).sum();
    for (b, a) in d2.iter_mut().zip(&d1) {
        *b -= dot / n1sq * a;
    }
    for d in [&mut d1, &mut d2] {
        let n: f64 = d.iter().map(|a| a * a).sum::<f64>().sqrt();
        for v in d.iter_mut() {
            *v /= n;
        }
    }
    // Filter normalization per tensor.
    let mut off = 0;
    for (len, _) in model.param_tensor_sizes() {
        let tn: f64 = theta[off..off + len].iter().map(|a| a * a).sum::<f64>().sqrt();
        for d in [&mut d1, &mut d2] {
            let dn: f64 = d[off..off + len].iter().map(|a| a * a).sum::<f64>().sqrt();
            let scale = if dn > 0.0 { tn / dn } else { 0.0 };
            for v in &mut d[off..off + len] {
                *v *= scale;
            }
        }
        off += len;
    }
    (d1, d2)
}

fn grid_axis(radius: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|i| -radius + (2.0 * radius) * i as f64 / (grid - 1) as f64)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    model: &FlowModel,
    base: &[Vec3],
    inputs: &Array2<f64>,
    objective: &dyn WarpObjective,
    grid: usize,
    radius: f64,
    seed: u64,
    chunked: bool,
) -> Result<String> {
    let theta = model.params_to_vec();
    let (d1, d2) = directions(model, seed);
    let axis = grid_axis(radius, grid);
    let mut csv = String::from("alpha,beta,loss\n");
    let mut probe = model.clone();
    let mut params = vec![0.0; theta.len()];
    for &alpha in &axis {
        for &beta in &axis {
            for k in 0..theta.len() {
                params[k] = theta[k] + alpha * d1[k] + beta * d2[k];
            }
            probe.set_params(&params)?;
            let loss = if chunked {
                eval_objective(&probe, base, inputs, objective)?
            } else {
                // Full-batch path, bit-matching the fusion stage's own
                // evaluation.
                let out = probe.forward(inputs)?;
                let warped: Vec<Vec3> = base
                    .iter()
                    .enumerate()
                    .map(|(i, p)| [p[0] + out[[i, 0]], p[1] + out[[i, 1]], p[2] + out[[i, 2]]])
                    .collect();
                objective.eval(&warped).0
            };
            csv.push_str(&format!("{alpha:.9},{beta:.9},{loss:.12e}\n"));
        }
    }
    Ok(csv)
}

pub fn run(
    sample_dir: &Path,
    method: LandscapeMethod,
    grid: usize,
    radius: f64,
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    anyhow::ensure!(grid >= 3, "--grid must be at least 3");
    let cfg = load_config(config, seed)?;
    let sample = read_sample(sample_dir)
        .with_context(|| format!("reading sample {}", sample_dir.display()))?;
    let n = sample.frames.len();
    let csv = match method {
        LandscapeMethod::Fnsf => {
            let (s2, s3) = (&sample.frames[n - 2], &sample.frames[n - 1]);
            let mut rng = Rng::new(cfg.solve.seed);
            let (_, model, _) = solve_two_frame(s2, s3, &cfg.solve, &mut rng)?;
            let objective = build_objective(s2, s3, &cfg.solve)?;
            let inputs = Array2::from_shape_fn((s2.len(), 3), |(i, a)| s2.point(i)[a]);
            sweep(
                &model,
                s2.points(),
                &inputs,
                objective.as_ref(),
                grid,
                radius,
                cfg.solve.seed,
                true,
            )?
        }
        LandscapeMethod::Mnsf => {
            let parts = fusion_landscape(&sample, &cfg.mnsf)?;
            sweep(
                &parts.model,
                &parts.base,
                &parts.features,
                parts.objective.as_ref(),
                grid,
                radius,
                cfg.solve.seed,
                false,
            )?
        }
    };
    write_text(out, &csv)
}
