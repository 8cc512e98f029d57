//! `probe`: per-sample error of the two-frame solve across point counts on a
//! fixed scene, resampled per trial. Feeds the error-versus-count trend test.

use std::path::Path;

use anyhow::Result;
use sceneflow_core::metrics::evaluate;
use sceneflow_core::solver::solve_two_frame;
use sceneflow_core::synth::generate_split;
use sceneflow_core::Rng;

use crate::common::{load_config, parse_usize_list, write_text};

pub fn run(
    sizes: &str,
    trials: usize,
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    anyhow::ensure!(trials >= 1, "--trials must be at least 1");
    let cfg = load_config(config, seed)?;
    let sizes = parse_usize_list(sizes, "sizes")?;

    // The actor stream is fixed: every size and trial sees the same scene
    // geometry and motion; only the surface sampling varies.
    let scene_root = Rng::new(cfg.scene.seed);
    let actor_rng = scene_root.derive(1);

    let mut csv = String::from("size,trial,epe\n");
    for (si, size) in sizes.iter().enumerate() {
        let mut spec = cfg.scene.clone();
        spec.counts = vec![*size];
        for trial in 0..trials {
            let sample_rng = scene_root
                .derive(2)
                .derive(10_000 + (si * 1000 + trial) as u64);
            let (sample, _) = generate_split(&spec, &actor_rng, &sample_rng)?;
            let n = sample.frames.len();
            let mut rng = Rng::new(cfg.solve.seed).derive((si * 1000 + trial) as u64);
            let (flow, _, _) = solve_two_frame(
                &sample.frames[n - 2],
                &sample.frames[n - 1],
                &cfg.solve,
                &mut rng,
            )?;
            let m = evaluate(&flow, &sample.gt_flow)?;
            csv.push_str(&format!("{size},{trial},{:.9}\n", m.epe));
        }
    }
    write_text(out, &csv)
}
