//! Shared helpers: configuration loading, sample discovery, CSV writing.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sceneflow_core::io::{read_run_config, RunConfig};

/// Flag combination problems; mapped to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Loads the run configuration (defaults when no file is given) and applies
/// the seed override.
pub fn load_config(config: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => read_run_config(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    cfg.finalize();
    Ok(cfg)
}

/// Sample directories under `dir`, sorted by name.
pub fn list_sample_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    if out.is_empty() {
        anyhow::bail!("no sample directories under {}", dir.display());
    }
    Ok(out)
}

/// Writes a CSV atomically enough for our purposes: full buffer, single call.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Parses comma-separated positive integers.
pub fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: usize = part
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("--{what}: {part:?} is not a positive integer")))?;
        if v == 0 {
            return Err(UsageError(format!("--{what}: sizes must be positive")).into());
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(UsageError(format!("--{what}: empty list")).into());
    }
    Ok(out)
}

/// Total solve time from a report file (`total_ms=` line).
pub fn report_total_ms(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading report {}", path.display()))?;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("total_ms=") {
            return v
                .trim()
                .parse::<f64>()
                .with_context(|| format!("parsing total_ms in {}", path.display()));
        }
    }
    anyhow::bail!("no total_ms line in {}", path.display())
}
