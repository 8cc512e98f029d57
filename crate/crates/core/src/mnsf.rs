//! Multi-frame scene flow: independent forward and backward solves on the
//! anchor frame, motion inversion of the backward flows, and a temporal
//! fusion stage optimized against the forward target.
//!
//! The forward and backward models are frozen during fusion; only the fusion
//! model (and the inverter, when learned) is optimized. The fusion stage
//! reuses the forward stage's distance grid, which shares one grid build per
//! sample.

use std::time::Instant;

use ndarray::Array2;

use crate::cloud::{FlowField, PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::loss::WarpObjective;
use crate::nn::{AdamState, FlowModel, ModelArch, ModelKind};
use crate::rng::Rng;
use crate::solver::{
    arch_for, build_objective, optimize_stage, CycleSpec, SolveConfig, SolveReport, StageSpec,
};
use crate::synth::SceneSample;

/// Maps the backward flow into the forward temporal direction.
#[derive(Debug, Clone, PartialEq)]
pub enum InverterModel {
    /// Exact negation.
    ConstantNegation,
    /// Per-vector affine map `f' = M b + c`.
    LearnedLinear { mat: [[f64; 3]; 3], bias: [f64; 3] },
}

impl InverterModel {
    pub fn learned_identity() -> InverterModel {
        InverterModel::LearnedLinear {
            mat: [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            bias: [0.0; 3],
        }
    }

    #[inline]
    fn apply_one(&self, b: Vec3) -> Vec3 {
        match self {
            InverterModel::ConstantNegation => [-b[0], -b[1], -b[2]],
            InverterModel::LearnedLinear { mat, bias } => {
                let mut out = *bias;
                for r in 0..3 {
                    out[r] += mat[r][0] * b[0] + mat[r][1] * b[1] + mat[r][2] * b[2];
                }
                out
            }
        }
    }
}

/// Applies the motion inverter to every vector of a backward flow.
pub fn invert(b: &FlowField, model: &InverterModel) -> FlowField {
    FlowField::new(b.vectors().iter().map(|v| model.apply_one(*v)).collect())
        .expect("inverted flow keeps size and finiteness")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverterKind {
    ConstantNegation,
    LearnedLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionKind {
    Mean,
    WeightedSum,
    Mlp,
}

/// Temporal fusion model combining the forward flow with inverted history
/// flows.
#[derive(Debug, Clone)]
pub enum FusionModel {
    /// Elementwise mean of the flow blocks.
    Mean,
    /// `W f + (I - W) f'` with a learnable 3x3 matrix; two blocks only.
    WeightedSum { w: Array2<f64> },
    /// MLP over the concatenated flow blocks.
    Mlp(FlowModel),
}

impl FusionModel {
    /// Applies the fusion to feature rows of concatenated flow blocks.
    pub fn apply(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        let blocks = features.ncols() / 3;
        match self {
            FusionModel::Mean => {
                let n = features.nrows();
                let mut out = Array2::zeros((n, 3));
                for i in 0..n {
                    for a in 0..3 {
                        let mut acc = 0.0;
                        for k in 0..blocks {
                            acc += features[[i, 3 * k + a]];
                        }
                        out[[i, a]] = acc / blocks as f64;
                    }
                }
                Ok(out)
            }
            FusionModel::WeightedSum { w } => {
                if blocks != 2 {
                    return Err(Error::ShapeMismatch(format!(
                        "weighted-sum fusion takes exactly 2 flow blocks, got {blocks}"
                    )));
                }
                let n = features.nrows();
                let mut out = Array2::zeros((n, 3));
                for i in 0..n {
                    for r in 0..3 {
                        let mut acc = features[[i, 3 + r]];
                        for c in 0..3 {
                            acc += w[[r, c]] * (features[[i, c]] - features[[i, 3 + c]]);
                        }
                        out[[i, r]] = acc;
                    }
                }
                Ok(out)
            }
            FusionModel::Mlp(m) => m.forward(features),
        }
    }
}

/// Multi-frame pipeline configuration.
#[derive(Debug, Clone)]
pub struct MnsfConfig {
    /// Configuration of the forward and backward stages.
    pub stage: SolveConfig,
    /// Frame count m >= 2; m = 2 degenerates to the plain two-frame solve.
    pub frames: usize,
    pub inverter: InverterKind,
    pub fusion: FusionKind,
    /// Fusion MLP depth (linear layers).
    pub fusion_depth: usize,
    pub fusion_width: usize,
    pub fusion_iters: usize,
    pub fusion_lr: f64,
    /// Cycle-consistency weight; zero disables the term.
    pub lambda_cyc: f64,
}

impl Default for MnsfConfig {
    fn default() -> Self {
        MnsfConfig {
            stage: SolveConfig::default(),
            frames: 3,
            inverter: InverterKind::ConstantNegation,
            fusion: FusionKind::Mlp,
            fusion_depth: 3,
            fusion_width: 32,
            fusion_iters: 800,
            fusion_lr: 0.01,
            lambda_cyc: 0.0,
        }
    }
}

/// Per-stage outcome of the pipeline.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub name: String,
    pub final_loss: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MnsfReport {
    pub stages: Vec<StageReport>,
    pub total_ms: f64,
}

impl MnsfReport {
    /// Flat key-value text block: `stage.<name>.{loss,iters,ms}` lines plus
    /// `total_ms`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            out.push_str(&format!("stage.{}.loss={:.12e}\n", s.name, s.final_loss));
            out.push_str(&format!("stage.{}.iters={}\n", s.name, s.iterations));
            out.push_str(&format!("stage.{}.ms={:.3}\n", s.name, s.wall_ms));
        }
        out.push_str(&format!("total_ms={:.3}\n", self.total_ms));
        out
    }
}

fn stage_report(name: &str, r: &SolveReport) -> StageReport {
    StageReport {
        name: name.to_string(),
        final_loss: r.final_loss,
        iterations: r.iterations,
        wall_ms: r.wall_ms,
    }
}

/// Forward stage: two-frame solve from the anchor frame toward the next.
pub fn solve_forward(
    s2: &PointCloud,
    s3: &PointCloud,
    cfg: &SolveConfig,
    rng: &mut Rng,
) -> Result<(FlowField, SolveReport)> {
    let (flow, _, report) = crate::solver::solve_two_frame(s2, s3, cfg, rng)?;
    Ok((flow, report))
}

/// Backward stage: two-frame solve from the anchor frame toward a history
/// frame, independently initialized from the forward stage.
pub fn solve_backward(
    s2: &PointCloud,
    s1: &PointCloud,
    cfg: &SolveConfig,
    rng: &mut Rng,
) -> Result<(FlowField, SolveReport)> {
    let (flow, _, report) = crate::solver::solve_two_frame(s2, s1, cfg, rng)?;
    Ok((flow, report))
}

fn fusion_features(
    forward: &FlowField,
    history: &[FlowField],
    inverter: Option<&InverterModel>,
) -> Array2<f64> {
    let n = forward.len();
    let blocks = 1 + history.len();
    let mut x = Array2::zeros((n, 3 * blocks));
    for i in 0..n {
        let f = forward.vector(i);
        for a in 0..3 {
            x[[i, a]] = f[a];
        }
        for (k, h) in history.iter().enumerate() {
            let v = match inverter {
                Some(m) => m.apply_one(h.vector(i)),
                None => h.vector(i),
            };
            for a in 0..3 {
                x[[i, 3 * (k + 1) + a]] = v[a];
            }
        }
    }
    x
}

/// Fusion-stage optimizer. `apply_inverter = false` feeds the raw backward
/// flows to the fusion model (the no-inversion ablation).
pub(crate) fn optimize_fusion(
    base: &PointCloud,
    objective: &dyn WarpObjective,
    forward: &FlowField,
    history: &[FlowField],
    apply_inverter: bool,
    cfg: &MnsfConfig,
    rng: &mut Rng,
) -> Result<(FlowField, FusionModel, InverterModel, SolveReport)> {
    let start = Instant::now();
    let n = base.len();
    if forward.len() != n || history.iter().any(|h| h.len() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            got: forward.len(),
        });
    }
    let blocks = 1 + history.len();

    let mut inverter = match cfg.inverter {
        InverterKind::ConstantNegation => InverterModel::ConstantNegation,
        InverterKind::LearnedLinear => InverterModel::learned_identity(),
    };
    let learn_inverter = apply_inverter
        && !history.is_empty()
        && matches!(inverter, InverterModel::LearnedLinear { .. });

    let mut fusion = match cfg.fusion {
        FusionKind::Mean => FusionModel::Mean,
        FusionKind::WeightedSum => {
            if blocks != 2 {
                return Err(Error::ShapeMismatch(format!(
                    "weighted-sum fusion takes exactly 2 flow blocks, got {blocks}"
                )));
            }
            let mut w = Array2::zeros((3, 3));
            for i in 0..3 {
                w[[i, i]] = 0.5;
            }
            FusionModel::WeightedSum { w }
        }
        FusionKind::Mlp => {
            let arch = ModelArch {
                kind: ModelKind::Mlp,
                input_dim: 3 * blocks,
                hidden: cfg.fusion_width,
                depth: cfg.fusion_depth,
                output_dim: 3,
                posenc_freqs: 4,
                bbox: base.bounds(),
            };
            FusionModel::Mlp(FlowModel::init(&arch, rng))
        }
    };

    let fusion_param_count = match &fusion {
        FusionModel::Mean => 0,
        FusionModel::WeightedSum { .. } => 9,
        FusionModel::Mlp(m) => m.param_count(),
    };
    let inverter_param_count = if learn_inverter { 12 } else { 0 };
    let total_params = fusion_param_count + inverter_param_count;

    let pack_params = |fusion: &FusionModel, inverter: &InverterModel| -> Vec<f64> {
        let mut p = Vec::with_capacity(total_params);
        match fusion {
            FusionModel::Mean => {}
            FusionModel::WeightedSum { w } => p.extend(w.iter()),
            FusionModel::Mlp(m) => p.extend(m.params_to_vec()),
        }
        if learn_inverter {
            if let InverterModel::LearnedLinear { mat, bias } = inverter {
                for row in mat {
                    p.extend_from_slice(row);
                }
                p.extend_from_slice(bias);
            }
        }
        p
    };
    let unpack_params = |p: &[f64], fusion: &mut FusionModel, inverter: &mut InverterModel| {
        match fusion {
            FusionModel::Mean => {}
            FusionModel::WeightedSum { w } => {
                for (slot, v) in w.iter_mut().zip(p.iter()) {
                    *slot = *v;
                }
            }
            FusionModel::Mlp(m) => m.set_params(&p[..fusion_param_count]).unwrap(),
        }
        if learn_inverter {
            if let InverterModel::LearnedLinear { mat, bias } = inverter {
                let q = &p[fusion_param_count..];
                for r in 0..3 {
                    for c in 0..3 {
                        mat[r][c] = q[3 * r + c];
                    }
                }
                bias.copy_from_slice(&q[9..12]);
            }
        }
    };

    // Parameter-free path: pure arithmetic on the frozen flows.
    if total_params == 0 {
        let inv_ref = if apply_inverter && !history.is_empty() {
            Some(&inverter)
        } else {
            None
        };
        let features = fusion_features(forward, history, inv_ref);
        let fused_mat = fusion.apply(&features)?;
        let fused: Vec<Vec3> = (0..n)
            .map(|i| [fused_mat[[i, 0]], fused_mat[[i, 1]], fused_mat[[i, 2]]])
            .collect();
        let warped: Vec<Vec3> = base
            .points()
            .iter()
            .zip(&fused)
            .map(|(p, f)| [p[0] + f[0], p[1] + f[1], p[2] + f[2]])
            .collect();
        let (loss, _) = objective.eval(&warped);
        return Ok((
            FlowField::new(fused)?,
            fusion,
            inverter,
            SolveReport {
                final_loss: loss,
                iterations: 0,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                loss_curve: Vec::new(),
            },
        ));
    }

    let mut params = pack_params(&fusion, &inverter);
    let mut adam = AdamState::new(params.len(), cfg.fusion_lr);
    let mut best_loss = f64::INFINITY;
    let mut best_params = params.clone();
    let mut best_flows: Vec<Vec3> = vec![[0.0; 3]; n];
    let mut loss_curve = Vec::new();
    let mut stall = 0usize;
    let mut iterations = 0usize;

    // Features are fixed unless the inverter itself is being learned.
    let inv_ref = if apply_inverter && !history.is_empty() {
        Some(inverter.clone())
    } else {
        None
    };
    let mut features = fusion_features(forward, history, inv_ref.as_ref());

    for iter in 0..cfg.fusion_iters {
        iterations = iter + 1;
        if learn_inverter {
            features = fusion_features(forward, history, Some(&inverter));
        }

        // Forward through the fusion model.
        let (fused_mat, tape) = match &fusion {
            FusionModel::Mlp(m) => {
                let (out, tape) = m.forward_tape(features.clone())?;
                (out, Some(tape))
            }
            other => (other.apply(&features)?, None),
        };
        let fused: Vec<Vec3> = (0..n)
            .map(|i| [fused_mat[[i, 0]], fused_mat[[i, 1]], fused_mat[[i, 2]]])
            .collect();
        let warped: Vec<Vec3> = base
            .points()
            .iter()
            .zip(&fused)
            .map(|(p, f)| [p[0] + f[0], p[1] + f[1], p[2] + f[2]])
            .collect();
        let (loss, up) = objective.eval(&warped);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iter, loss });
        }
        loss_curve.push(loss);
        if loss < best_loss {
            let significant = best_loss - loss > cfg.stage.min_delta;
            best_loss = loss;
            best_params.copy_from_slice(&params);
            best_flows.copy_from_slice(&fused);
            if significant {
                stall = 0;
            } else {
                stall += 1;
            }
        } else {
            stall += 1;
        }
        if stall >= cfg.stage.patience {
            break;
        }

        let upstream = Array2::from_shape_fn((n, 3), |(i, a)| up[i][a]);
        let mut grad = vec![0.0f64; params.len()];
        // dL/d f'_k blocks, needed for the learned inverter.
        let mut d_blocks: Option<Array2<f64>> = None;
        match &fusion {
            FusionModel::Mean => {
                if learn_inverter {
                    let mut d = Array2::zeros((n, 3 * blocks));
                    let scale = 1.0 / blocks as f64;
                    for i in 0..n {
                        for k in 0..blocks {
                            for a in 0..3 {
                                d[[i, 3 * k + a]] = upstream[[i, a]] * scale;
                            }
                        }
                    }
                    d_blocks = Some(d);
                }
            }
            FusionModel::WeightedSum { w } => {
                // fused = f' + W (f - f').
                for r in 0..3 {
                    for c in 0..3 {
                        let mut acc = 0.0;
                        for i in 0..n {
                            acc += upstream[[i, r]] * (features[[i, c]] - features[[i, 3 + c]]);
                        }
                        grad[3 * r + c] = acc;
                    }
                }
                if learn_inverter {
                    let mut d = Array2::zeros((n, 6));
                    for i in 0..n {
                        for c in 0..3 {
                            let mut acc = upstream[[i, c]];
                            for r in 0..3 {
                                acc -= w[[r, c]] * upstream[[i, r]];
                            }
                            d[[i, 3 + c]] = acc;
                        }
                    }
                    d_blocks = Some(d);
                }
            }
            FusionModel::Mlp(m) => {
                let (grads, d_input) = m.backward(tape.unwrap(), &upstream);
                grad[..fusion_param_count].copy_from_slice(&grads.flatten());
                if learn_inverter {
                    d_blocks = Some(d_input);
                }
            }
        }
        if learn_inverter {
            let d = d_blocks.as_ref().unwrap();
            let base_off = fusion_param_count;
            for (k, h) in history.iter().enumerate() {
                let col = 3 * (k + 1);
                for i in 0..n {
                    let b = h.vector(i);
                    for r in 0..3 {
                        let u = d[[i, col + r]];
                        for (c, bc) in b.iter().enumerate() {
                            grad[base_off + 3 * r + c] += u * bc;
                        }
                        grad[base_off + 9 + r] += u;
                    }
                }
            }
        }

        adam.step(&mut params, &grad)?;
        unpack_params(&params, &mut fusion, &mut inverter);
    }

    unpack_params(&best_params, &mut fusion, &mut inverter);
    Ok((
        FlowField::new(best_flows)?,
        fusion,
        inverter,
        SolveReport {
            final_loss: best_loss,
            iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            loss_curve,
        },
    ))
}

/// Fusion stage over one forward and one backward flow, as in the three-frame
/// pipeline. Builds its own objective against `s3`.
pub fn solve_fusion(
    s2: &PointCloud,
    s3: &PointCloud,
    forward: &FlowField,
    backward: &FlowField,
    cfg: &MnsfConfig,
    rng: &mut Rng,
) -> Result<(FlowField, FusionModel, InverterModel, SolveReport)> {
    let objective = build_objective(s2, s3, &cfg.stage)?;
    optimize_fusion(
        s2,
        objective.as_ref(),
        forward,
        std::slice::from_ref(backward),
        true,
        cfg,
        rng,
    )
}

/// Full multi-frame pipeline on the last `cfg.frames` frames of `sample`.
///
/// Runs the forward solve, `m - 2` backward solves, inversion, and fusion;
/// returns the fused flow for the anchor frame toward the last frame.
/// With `cfg.frames == 2` this is exactly the two-frame solve.
pub fn solve_mnsf(sample: &SceneSample, cfg: &MnsfConfig) -> Result<(FlowField, MnsfReport)> {
    solve_mnsf_impl(sample, cfg, 0.0)
}

/// As [`solve_mnsf`] with the cycle-consistency term enabled at
/// `cfg.lambda_cyc` on the forward and backward stages.
pub fn solve_mnsf_cycle(sample: &SceneSample, cfg: &MnsfConfig) -> Result<(FlowField, MnsfReport)> {
    solve_mnsf_impl(sample, cfg, cfg.lambda_cyc)
}

fn solve_mnsf_impl(
    sample: &SceneSample,
    cfg: &MnsfConfig,
    lambda_cyc: f64,
) -> Result<(FlowField, MnsfReport)> {
    let start = Instant::now();
    let m = cfg.frames;
    if m < 2 {
        return Err(Error::FrameCountError {
            required: 2,
            got: m,
        });
    }
    if sample.frames.len() < m {
        return Err(Error::FrameCountError {
            required: m,
            got: sample.frames.len(),
        });
    }
    let frames = &sample.frames[sample.frames.len() - m..];
    let s2 = &frames[m - 2];
    let s3 = &frames[m - 1];

    // Degenerate two-frame case: no backward stage, no fusion; bit-identical
    // to the plain solve under the same seed.
    if m == 2 {
        let mut rng = Rng::new(cfg.stage.seed);
        let (flow, _, report) = crate::solver::solve_two_frame(s2, s3, &cfg.stage, &mut rng)?;
        return Ok((
            flow,
            MnsfReport {
                stages: vec![stage_report("forward", &report)],
                total_ms: start.elapsed().as_secs_f64() * 1e3,
            },
        ));
    }

    let root = Rng::new(cfg.stage.seed);
    let cycle_for = |arch: &ModelArch| -> Option<CycleSpec> {
        if lambda_cyc > 0.0 {
            Some(CycleSpec {
                lambda: lambda_cyc,
                arch: *arch,
            })
        } else {
            None
        }
    };

    // Forward stage; its objective is shared with the fusion stage.
    let objective3 = build_objective(s2, s3, &cfg.stage)?;
    let arch_fwd = arch_for(&cfg.stage, 3, s2, s3);
    let fwd_spec = StageSpec {
        base: s2.points(),
        inputs: Array2::from_shape_fn((s2.len(), 3), |(i, a)| s2.point(i)[a]),
        objective: objective3.as_ref(),
        arch: arch_fwd,
        cycle: cycle_for(&arch_fwd),
    };
    let mut rng_f = root.derive(1);
    let (flow_fwd, _, rep_fwd) = optimize_stage(&fwd_spec, &cfg.stage, &mut rng_f)?;
    let mut stages = vec![stage_report("forward", &rep_fwd)];

    // One backward stage per history frame: targets m-3, m-4, ..., 0.
    let mut history = Vec::with_capacity(m - 2);
    for k in 1..=(m - 2) {
        let target = &frames[m - 2 - k];
        let objective = build_objective(s2, target, &cfg.stage)?;
        let arch = arch_for(&cfg.stage, 3, s2, target);
        let spec = StageSpec {
            base: s2.points(),
            inputs: Array2::from_shape_fn((s2.len(), 3), |(i, a)| s2.point(i)[a]),
            objective: objective.as_ref(),
            arch,
            cycle: cycle_for(&arch),
        };
        let mut rng_b = root.derive(100 + k as u64);
        let (flow_b, _, rep_b) = optimize_stage(&spec, &cfg.stage, &mut rng_b)?;
        let name = if m == 3 {
            "backward".to_string()
        } else {
            format!("backward_{k}")
        };
        stages.push(StageReport {
            name,
            final_loss: rep_b.final_loss,
            iterations: rep_b.iterations,
            wall_ms: rep_b.wall_ms,
        });
        history.push(flow_b);
    }

    let mut rng_fus = root.derive(3);
    let (fused, _, _, rep_fus) = optimize_fusion(
        s2,
        objective3.as_ref(),
        &flow_fwd,
        &history,
        true,
        cfg,
        &mut rng_fus,
    )?;
    stages.push(stage_report("fusion", &rep_fus));

    Ok((
        fused,
        MnsfReport {
            stages,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    ))
}

/// Ablation suites mirroring the comparative tables: component combinations,
/// fusion architectures, fusion depths, and frame counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationSuite {
    Components,
    FusionArch,
    FusionDepth,
    Frames,
}

/// One ablation table row: the variant's flow estimate and its attributed
/// wall time (the stage solves it depends on).
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub name: String,
    pub flow: FlowField,
    pub wall_ms: f64,
}

/// Runs an ablation suite on one sample. Stage solves are shared across
/// variants: each variant's flow is identical to an independent run because
/// stage seeds are derived per stage, not per variant.
pub fn run_ablation(
    sample: &SceneSample,
    cfg: &MnsfConfig,
    suite: AblationSuite,
) -> Result<Vec<AblationRow>> {
    match suite {
        AblationSuite::Components => run_components(sample, cfg),
        AblationSuite::FusionArch => run_fusion_variants(
            sample,
            cfg,
            &[
                ("mean", FusionKind::Mean, cfg.fusion_depth),
                ("weighted_sum", FusionKind::WeightedSum, cfg.fusion_depth),
                ("mlp", FusionKind::Mlp, cfg.fusion_depth),
            ],
        ),
        AblationSuite::FusionDepth => run_fusion_variants(
            sample,
            cfg,
            &[
                ("2_layers", FusionKind::Mlp, 2),
                ("3_layers", FusionKind::Mlp, 3),
                ("5_layers", FusionKind::Mlp, 5),
                ("7_layers", FusionKind::Mlp, 7),
            ],
        ),
        AblationSuite::Frames => run_frames(sample, cfg),
    }
}

/// Shared three-frame stage solves: forward and one-step backward flows on
/// the anchor frame, plus the forward-target objective.
struct SharedStages {
    forward: FlowField,
    backward: FlowField,
    objective: Box<dyn WarpObjective>,
    fwd_ms: f64,
    bwd_ms: f64,
}

fn solve_shared_stages(sample: &SceneSample, cfg: &MnsfConfig) -> Result<SharedStages> {
    if sample.frames.len() < 3 {
        return Err(Error::FrameCountError {
            required: 3,
            got: sample.frames.len(),
        });
    }
    let n = sample.frames.len();
    let s1 = &sample.frames[n - 3];
    let s2 = &sample.frames[n - 2];
    let s3 = &sample.frames[n - 1];
    let root = Rng::new(cfg.stage.seed);
    let objective = build_objective(s2, s3, &cfg.stage)?;
    let arch = arch_for(&cfg.stage, 3, s2, s3);
    let coords = Array2::from_shape_fn((s2.len(), 3), |(i, a)| s2.point(i)[a]);
    let fwd_spec = StageSpec {
        base: s2.points(),
        inputs: coords.clone(),
        objective: objective.as_ref(),
        arch,
        cycle: None,
    };
    let (forward, _, rep_f) = optimize_stage(&fwd_spec, &cfg.stage, &mut root.derive(1))?;
    let objective1 = build_objective(s2, s1, &cfg.stage)?;
    let bwd_spec = StageSpec {
        base: s2.points(),
        inputs: coords,
        objective: objective1.as_ref(),
        arch: arch_for(&cfg.stage, 3, s2, s1),
        cycle: None,
    };
    let (backward, _, rep_b) = optimize_stage(&bwd_spec, &cfg.stage, &mut root.derive(101))?;
    Ok(SharedStages {
        forward,
        backward,
        objective,
        fwd_ms: rep_f.wall_ms,
        bwd_ms: rep_b.wall_ms,
    })
}

fn run_components(sample: &SceneSample, cfg: &MnsfConfig) -> Result<Vec<AblationRow>> {
    let n = sample.frames.len();
    let s2 = &sample.frames[n - 2];
    let shared = solve_shared_stages(sample, cfg)?;
    let root = Rng::new(cfg.stage.seed);
    let mut rows = Vec::new();

    rows.push(AblationRow {
        name: "fnsf".into(),
        flow: shared.forward.clone(),
        wall_ms: shared.fwd_ms,
    });

    // (a) fusion model refines the forward flow alone; no history frame.
    let cfg_a = MnsfConfig {
        fusion: FusionKind::Mlp,
        ..cfg.clone()
    };
    let (flow_a, _, _, rep_a) = optimize_fusion(
        s2,
        shared.objective.as_ref(),
        &shared.forward,
        &[],
        false,
        &cfg_a,
        &mut root.derive(3),
    )?;
    rows.push(AblationRow {
        name: "a_fusion_only".into(),
        flow: flow_a,
        wall_ms: shared.fwd_ms + rep_a.wall_ms,
    });

    // (b) invert then average; pure arithmetic.
    let cfg_b = MnsfConfig {
        fusion: FusionKind::Mean,
        inverter: InverterKind::ConstantNegation,
        ..cfg.clone()
    };
    let (flow_b, _, _, rep_b) = optimize_fusion(
        s2,
        shared.objective.as_ref(),
        &shared.forward,
        std::slice::from_ref(&shared.backward),
        true,
        &cfg_b,
        &mut root.derive(3),
    )?;
    rows.push(AblationRow {
        name: "b_invert_mean".into(),
        flow: flow_b,
        wall_ms: shared.fwd_ms + shared.bwd_ms + rep_b.wall_ms,
    });

    // (c) fuse the raw opposing flows, no inversion.
    let cfg_c = MnsfConfig {
        fusion: FusionKind::Mlp,
        ..cfg.clone()
    };
    let (flow_c, _, _, rep_c) = optimize_fusion(
        s2,
        shared.objective.as_ref(),
        &shared.forward,
        std::slice::from_ref(&shared.backward),
        false,
        &cfg_c,
        &mut root.derive(3),
    )?;
    rows.push(AblationRow {
        name: "c_fuse_raw".into(),
        flow: flow_c,
        wall_ms: shared.fwd_ms + shared.bwd_ms + rep_c.wall_ms,
    });

    // (d) the full pipeline: invert then fuse.
    let cfg_d = MnsfConfig {
        fusion: FusionKind::Mlp,
        ..cfg.clone()
    };
    let (flow_d, _, _, rep_d) = optimize_fusion(
        s2,
        shared.objective.as_ref(),
        &shared.forward,
        std::slice::from_ref(&shared.backward),
        true,
        &cfg_d,
        &mut root.derive(3),
    )?;
    rows.push(AblationRow {
        name: "d_full".into(),
        flow: flow_d,
        wall_ms: shared.fwd_ms + shared.bwd_ms + rep_d.wall_ms,
    });

    Ok(rows)
}

fn run_fusion_variants(
    sample: &SceneSample,
    cfg: &MnsfConfig,
    variants: &[(&str, FusionKind, usize)],
) -> Result<Vec<AblationRow>> {
    let n = sample.frames.len();
    let s2 = &sample.frames[n - 2];
    let shared = solve_shared_stages(sample, cfg)?;
    let root = Rng::new(cfg.stage.seed);
    let mut rows = Vec::new();
    for (name, kind, depth) in variants {
        let vcfg = MnsfConfig {
            fusion: *kind,
            fusion_depth: *depth,
            ..cfg.clone()
        };
        let (flow, _, _, rep) = optimize_fusion(
            s2,
            shared.objective.as_ref(),
            &shared.forward,
            std::slice::from_ref(&shared.backward),
            true,
            &vcfg,
            &mut root.derive(3),
        )?;
        rows.push(AblationRow {
            name: name.to_string(),
            flow,
            wall_ms: shared.fwd_ms + shared.bwd_ms + rep.wall_ms,
        });
    }
    Ok(rows)
}

fn run_frames(sample: &SceneSample, cfg: &MnsfConfig) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for m in [2usize, 3, 4, 5] {
        if sample.frames.len() < m {
            continue;
        }
        let mcfg = MnsfConfig {
            frames: m,
            ..cfg.clone()
        };
        let (flow, report) = solve_mnsf(sample, &mcfg)?;
        rows.push(AblationRow {
            name: format!("{m}_frames"),
            flow,
            wall_ms: report.stages.iter().map(|s| s.wall_ms).sum(),
        });
    }
    Ok(rows)
}

/// Everything needed to slice the fusion-stage loss surface around the
/// converged parameters.
pub struct FusionLandscape {
    pub model: FlowModel,
    /// Fixed fusion inputs: forward and inverted backward flows per point.
    pub features: Array2<f64>,
    pub base: Vec<crate::cloud::Vec3>,
    pub objective: Box<dyn WarpObjective>,
    pub final_loss: f64,
}

/// Runs the three-frame pipeline and exposes the converged fusion stage.
/// Requires a parametric (MLP) fusion model.
pub fn fusion_landscape(sample: &SceneSample, cfg: &MnsfConfig) -> Result<FusionLandscape> {
    if cfg.fusion != FusionKind::Mlp {
        return Err(Error::ShapeMismatch(
            "the fusion loss landscape needs a parametric (mlp) fusion model".into(),
        ));
    }
    if cfg.inverter != InverterKind::ConstantNegation {
        return Err(Error::ShapeMismatch(
            "the fusion loss landscape assumes the constant inverter".into(),
        ));
    }
    let n = sample.frames.len();
    if n < 3 {
        return Err(Error::FrameCountError {
            required: 3,
            got: n,
        });
    }
    let s2 = &sample.frames[n - 2];
    let shared = solve_shared_stages(sample, cfg)?;
    let root = Rng::new(cfg.stage.seed);
    let (_, fusion, inverter, rep) = optimize_fusion(
        s2,
        shared.objective.as_ref(),
        &shared.forward,
        std::slice::from_ref(&shared.backward),
        true,
        cfg,
        &mut root.derive(3),
    )?;
    let features = fusion_features(
        &shared.forward,
        std::slice::from_ref(&shared.backward),
        Some(&inverter),
    );
    let model = match fusion {
        FusionModel::Mlp(m) => m,
        _ => unreachable!("checked above"),
    };
    Ok(FusionLandscape {
        model,
        features,
        base: s2.points().to_vec(),
        objective: shared.objective,
        final_loss: rep.final_loss,
    })
}
