//! Plain-text `key=value` run configuration and sample metadata.
//!
//! One flat namespace with `solve.`, `mnsf.`, `scene.`, and `bench.`
//! prefixes, mirroring every solver, pipeline, and scene field. Unknown keys
//! and malformed values are rejected; every error carries its line number and
//! all errors are reported at once.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mnsf::{FusionKind, InverterKind, MnsfConfig};
use crate::nn::ModelKind;
use crate::solver::{LossKind, SolveConfig};
use crate::synth::SceneSpec;

/// Full run configuration: two-frame solver, multi-frame pipeline, and scene
/// generator settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solve: SolveConfig,
    pub mnsf: MnsfConfig,
    pub scene: SceneSpec,
    /// Fixed iteration budget used by the timing benchmark.
    pub bench_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solve = SolveConfig::default();
        RunConfig {
            mnsf: MnsfConfig {
                stage: solve.clone(),
                ..MnsfConfig::default()
            },
            solve,
            scene: SceneSpec::default(),
            bench_iters: 20,
        }
    }
}

impl RunConfig {
    /// Re-synchronizes the pipeline's stage config with the solve section.
    pub fn finalize(&mut self) {
        self.mnsf.stage = self.solve.clone();
    }

    /// Applies one seed to the solver and the scene generator alike.
    pub fn override_seed(&mut self, seed: u64) {
        self.solve.seed = seed;
        self.scene.seed = seed;
        self.finalize();
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true|false, got {other:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("expected {what}, got {v:?}"))
}

fn apply_solve_key(cfg: &mut SolveConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "loss" => {
            cfg.loss = match v {
                "chamfer" => LossKind::Chamfer,
                "dt" => LossKind::Dt,
                other => return Err(format!("expected chamfer|dt, got {other:?}")),
            }
        }
        "model" => {
            cfg.model = match v {
                "mlp" => ModelKind::Mlp,
                "linear_posenc" => ModelKind::LinearPosEnc,
                other => return Err(format!("expected mlp|linear_posenc, got {other:?}")),
            }
        }
        "max_iters" => cfg.max_iters = parse_num(v, "a positive integer")?,
        "patience" => cfg.patience = parse_num(v, "a positive integer")?,
        "min_delta" => cfg.min_delta = parse_num(v, "a float")?,
        "lr" => cfg.lr = parse_num(v, "a float")?,
        "seed" => cfg.seed = parse_num(v, "an unsigned integer")?,
        "cell" => cfg.cell = parse_num(v, "a float")?,
        "tau" => cfg.tau = parse_num(v, "a float")?,
        "hidden" => cfg.hidden = parse_num(v, "a positive integer")?,
        "depth" => cfg.depth = parse_num(v, "a positive integer")?,
        "posenc_freqs" => cfg.posenc_freqs = parse_num(v, "a positive integer")?,
        "dt_power" => {
            cfg.dt_power = parse_num(v, "1 or 2")?;
            if cfg.dt_power != 1 && cfg.dt_power != 2 {
                return Err(format!("dt_power must be 1 or 2, got {v}"));
            }
        }
        "chamfer_bidirectional" => cfg.chamfer_bidirectional = parse_bool(v)?,
        "chamfer_exhaustive" => cfg.chamfer_exhaustive = parse_bool(v)?,
        other => return Err(format!("unknown solve key {other:?}")),
    }
    Ok(())
}

fn apply_mnsf_key(cfg: &mut MnsfConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "frames" => cfg.frames = parse_num(v, "an integer >= 2")?,
        "inverter" => {
            cfg.inverter = match v {
                "constant_negation" => InverterKind::ConstantNegation,
                "learned_linear" => InverterKind::LearnedLinear,
                other => {
                    return Err(format!(
                        "expected constant_negation|learned_linear, got {other:?}"
                    ))
                }
            }
        }
        "fusion" => {
            cfg.fusion = match v {
                "mean" => FusionKind::Mean,
                "weighted_sum" => FusionKind::WeightedSum,
                "mlp" => FusionKind::Mlp,
                other => return Err(format!("expected mean|weighted_sum|mlp, got {other:?}")),
            }
        }
        "fusion_depth" => cfg.fusion_depth = parse_num(v, "a positive integer")?,
        "fusion_width" => cfg.fusion_width = parse_num(v, "a positive integer")?,
        "fusion_iters" => cfg.fusion_iters = parse_num(v, "a positive integer")?,
        "fusion_lr" => cfg.fusion_lr = parse_num(v, "a float")?,
        "lambda_cyc" => {
            cfg.lambda_cyc = parse_num(v, "a float >= 0")?;
            if cfg.lambda_cyc < 0.0 {
                return Err("lambda_cyc must be >= 0".into());
            }
        }
        other => return Err(format!("unknown mnsf key {other:?}")),
    }
    Ok(())
}

fn apply_scene_key(spec: &mut SceneSpec, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "m" | "frames" => spec.frames = parse_num(v, "an integer >= 2")?,
        "seed" => spec.seed = parse_num(v, "an unsigned integer")?,
        "actors" => spec.actors = parse_num(v, "an integer >= 0")?,
        "actor_extent_min" => spec.actor_extent_min = parse_num(v, "a float")?,
        "actor_extent_max" => spec.actor_extent_max = parse_num(v, "a float")?,
        "speed_min" => spec.speed_min = parse_num(v, "a float")?,
        "speed_max" => spec.speed_max = parse_num(v, "a float")?,
        "yaw_rate_max" => spec.yaw_rate_max = parse_num(v, "a float")?,
        "bg_extent" => spec.bg_extent = parse_num(v, "a float")?,
        "ego_vx" => spec.ego_vx = parse_num(v, "a float")?,
        "ego_vy" => spec.ego_vy = parse_num(v, "a float")?,
        "ego_yaw_rate" => spec.ego_yaw_rate = parse_num(v, "a float")?,
        "counts" => {
            let mut counts = Vec::new();
            for part in v.split(',') {
                counts.push(parse_num(part.trim(), "a positive integer")?);
            }
            spec.counts = counts;
        }
        "resample" => spec.resample = parse_bool(v)?,
        "noise" => spec.noise = parse_num(v, "a float")?,
        "dropout" => spec.dropout = parse_num(v, "a float")?,
        "fast_motion" => spec.fast_motion = parse_bool(v)?,
        other => return Err(format!("unknown scene key {other:?}")),
    }
    Ok(())
}

/// Parses a full run configuration, starting from defaults. Reports every
/// error with its line number.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = lineno + 1;
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected key=value, got {line:?}"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let res = if let Some(k) = key.strip_prefix("solve.") {
            apply_solve_key(&mut cfg.solve, k, value)
        } else if let Some(k) = key.strip_prefix("mnsf.") {
            apply_mnsf_key(&mut cfg.mnsf, k, value)
        } else if let Some(k) = key.strip_prefix("scene.") {
            apply_scene_key(&mut cfg.scene, k, value)
        } else if key == "bench.iters" {
            parse_num::<usize>(value, "a positive integer").map(|n| cfg.bench_iters = n)
        } else {
            Err(format!("unknown key {key:?}"))
        };
        if let Err(msg) = res {
            errors.push(format!("line {lineno}: {msg}"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::ConfigParse(errors.join("\n")));
    }
    cfg.finalize();
    Ok(cfg)
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_run_config(&text)
}

/// Sample metadata: `m`, `seed`, then every scene field, one per line.
pub(crate) fn scene_meta_text(spec: &SceneSpec) -> String {
    let counts = spec
        .counts
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "m={}\nseed={}\nactors={}\nactor_extent_min={}\nactor_extent_max={}\nspeed_min={}\n\
         speed_max={}\nyaw_rate_max={}\nbg_extent={}\nego_vx={}\nego_vy={}\nego_yaw_rate={}\n\
         counts={}\nresample={}\nnoise={}\ndropout={}\nfast_motion={}\n",
        spec.frames,
        spec.seed,
        spec.actors,
        spec.actor_extent_min,
        spec.actor_extent_max,
        spec.speed_min,
        spec.speed_max,
        spec.yaw_rate_max,
        spec.bg_extent,
        spec.ego_vx,
        spec.ego_vy,
        spec.ego_yaw_rate,
        counts,
        spec.resample,
        spec.noise,
        spec.dropout,
        spec.fast_motion,
    )
}

/// Parses `meta.txt`, reporting the first malformed line.
pub(crate) fn parse_scene_meta(text: &str) -> Result<SceneSpec> {
    let mut spec = SceneSpec::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::MetaParse(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        apply_scene_key(&mut spec, key.trim(), value.trim())
            .map_err(|msg| Error::MetaParse(format!("line {}: {msg}", lineno + 1)))?;
    }
    Ok(spec)
}
