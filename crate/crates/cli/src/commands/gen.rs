//! `gen`: write synthetic sample directories.

use std::path::Path;

use anyhow::{Context, Result};
use sceneflow_core::io::write_sample;
use sceneflow_core::synth::generate;
use sceneflow_core::Rng;

use crate::common::load_config;

pub fn run(config: Option<std::path::PathBuf>, out: &Path, count: usize, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config.as_deref(), seed)?;
    let root = Rng::new(cfg.scene.seed);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for i in 0..count {
        let mut rng = root.derive(i as u64);
        let sample = generate(&cfg.scene, &mut rng)?;
        let dir = out.join(format!("sample_{i:04}"));
        write_sample(&dir, &sample)?;
    }
    println!("wrote {count} samples to {}", out.display());
    Ok(())
}
