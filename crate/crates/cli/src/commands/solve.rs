//! `solve`: run one method on one sample and write the estimated flow.

use std::path::Path;

use anyhow::{Context, Result};
use sceneflow_core::io::{read_sample, write_flow, RunConfig};
use sceneflow_core::mnsf::{solve_mnsf, solve_mnsf_cycle};
use sceneflow_core::nn::ModelKind;
use sceneflow_core::solver::{
    solve_joint, solve_temporal_encoding, solve_two_frame, LossKind, SolveConfig, SolveReport,
};
use sceneflow_core::synth::SceneSample;
use sceneflow_core::{Error, FlowField, Rng};

use crate::common::load_config;
use crate::Method;

fn two_frame_cfg(base: &SolveConfig, loss: LossKind, model: ModelKind) -> SolveConfig {
    SolveConfig {
        loss,
        model,
        ..base.clone()
    }
}

fn report_text(stage: &str, r: &SolveReport) -> String {
    format!(
        "stage.{stage}.loss={:.12e}\nstage.{stage}.iters={}\nstage.{stage}.ms={:.3}\ntotal_ms={:.3}\n",
        r.final_loss, r.iterations, r.wall_ms, r.wall_ms
    )
}

fn last_three(sample: &SceneSample) -> Result<(usize, usize, usize), Error> {
    let n = sample.frames.len();
    if n < 3 {
        return Err(Error::FrameCountError {
            required: 3,
            got: n,
        });
    }
    Ok((n - 3, n - 2, n - 1))
}

/// Runs `method` on `sample`, returning the estimated flow for the anchor
/// frame toward the last frame plus a report text block.
pub fn solve_sample(
    method: Method,
    sample: &SceneSample,
    cfg: &RunConfig,
) -> Result<(FlowField, String)> {
    let n = sample.frames.len();
    let anchor = n - 2;
    let mut rng = Rng::new(cfg.solve.seed);
    let out = match method {
        Method::Nsfp | Method::NsfpLinear | Method::Fnsf | Method::FnsfLinear => {
            let (loss, model) = match method {
                Method::Nsfp => (LossKind::Chamfer, ModelKind::Mlp),
                Method::NsfpLinear => (LossKind::Chamfer, ModelKind::LinearPosEnc),
                Method::Fnsf => (LossKind::Dt, ModelKind::Mlp),
                _ => (LossKind::Dt, ModelKind::LinearPosEnc),
            };
            let scfg = two_frame_cfg(&cfg.solve, loss, model);
            let (flow, _, report) =
                solve_two_frame(&sample.frames[anchor], &sample.frames[anchor + 1], &scfg, &mut rng)?;
            (flow, report_text("solve", &report))
        }
        Method::FnsfJoint => {
            let (i1, i2, i3) = last_three(sample)?;
            let (_, flow_cur, report) = solve_joint(
                &sample.frames[i1],
                &sample.frames[i2],
                &sample.frames[i3],
                &cfg.solve,
                &mut rng,
            )?;
            (flow_cur, report_text("joint", &report))
        }
        Method::FnsfTenc => {
            let (i1, i2, i3) = last_three(sample)?;
            let (_, flow_cur, report) = solve_temporal_encoding(
                &sample.frames[i1],
                &sample.frames[i2],
                &sample.frames[i3],
                &cfg.solve,
                &mut rng,
            )?;
            (flow_cur, report_text("temporal_encoding", &report))
        }
        Method::Mnsf => {
            let (flow, report) = solve_mnsf(sample, &cfg.mnsf)?;
            (flow, report.to_text())
        }
        Method::MnsfCycle => {
            let mut mcfg = cfg.mnsf.clone();
            if mcfg.lambda_cyc == 0.0 {
                mcfg.lambda_cyc = 1.0;
            }
            let (flow, report) = solve_mnsf_cycle(sample, &mcfg)?;
            (flow, report.to_text())
        }
    };
    Ok(out)
}

pub fn run(
    method: Method,
    sample_dir: &Path,
    out: &Path,
    report: Option<&Path>,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let sample = read_sample(sample_dir)
        .with_context(|| format!("reading sample {}", sample_dir.display()))?;
    let (flow, report_text) = solve_sample(method, &sample, &cfg)?;
    write_flow(out, &flow)?;
    if let Some(rp) = report {
        std::fs::write(rp, report_text).with_context(|| format!("writing {}", rp.display()))?;
    }
    Ok(())
}
