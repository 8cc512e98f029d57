//! Scene flow command line: generate synthetic samples, run any method,
//! evaluate against ground truth, sweep ablations, benchmark, and export
//! loss-landscape and scaling-probe tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod commands;
mod common;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use common::UsageError;

#[derive(Parser)]
#[command(
    name = "sceneflow",
    version,
    about = "Self-supervised neural scene flow on point clouds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// MLP optimized against the truncated Chamfer distance.
    Nsfp,
    /// Positional-encoded linear model, Chamfer distance.
    NsfpLinear,
    /// MLP optimized against the distance-transform grid.
    Fnsf,
    /// Positional-encoded linear model, distance-transform grid.
    FnsfLinear,
    /// One shared model jointly fits the previous and current flow.
    FnsfJoint,
    /// Shared model with a temporal input coordinate.
    FnsfTenc,
    /// Multi-frame pipeline: forward + backward + inversion + fusion.
    Mnsf,
    /// Multi-frame pipeline with the cycle-consistency term.
    MnsfCycle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LandscapeMethod {
    Fnsf,
    Mnsf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Component combinations: fnsf, (a)..(d).
    Components,
    /// Fusion architectures: mean, weighted sum, MLP.
    FusionArch,
    /// Fusion MLP depths: 2, 3, 5, 7 layers.
    FusionDepth,
    /// Frame counts: 2, 3, 4, 5.
    Frames,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scene sample directories.
    Gen {
        /// Scene/run configuration file (alias of --config).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate scene flow for one sample with the chosen method.
    Solve {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        sample: PathBuf,
        /// Output flow file (FLW1).
        #[arg(long)]
        out: PathBuf,
        /// Output report (key=value text).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate an estimated flow against a sample's ground truth.
    Eval {
        /// Estimated flow file (single-sample mode).
        #[arg(long)]
        est: Option<PathBuf>,
        /// Sample directory (single-sample mode).
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Solve report whose total time fills the time column.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory of estimated flow files named after samples (aggregate mode).
        #[arg(long)]
        est_dir: Option<PathBuf>,
        /// Directory of sample directories (aggregate mode).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an ablation suite over a directory of samples.
    Ablate {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Wall-time benchmark over point counts and methods.
    Bench {
        /// Comma-separated point counts.
        #[arg(long, default_value = "1024,8192,20000")]
        sizes: String,
        /// Comma-separated methods.
        #[arg(long, default_value = "nsfp,fnsf")]
        methods: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Loss surface on a plane of filter-normalized parameter perturbations.
    Landscape {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, value_enum)]
        method: LandscapeMethod,
        /// Grid resolution per axis (odd keeps an exact center cell).
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Perturbation radius.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Error-versus-point-count scaling probe on a fixed scene.
    Probe {
        #[arg(long, default_value = "256,1024,4096")]
        sizes: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {e}");
                ExitCode::from(1)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Command::Gen {
            spec,
            out,
            count,
            seed,
            config,
        } => commands::gen::run(spec.or(config), &out, count, seed),
        Command::Solve {
            method,
            sample,
            out,
            report,
            seed,
            config,
        } => commands::solve::run(method, &sample, &out, report.as_deref(), seed, config.as_deref()),
        Command::Eval {
            est,
            sample,
            report,
            est_dir,
            samples,
            out,
            seed: _,
            config: _,
        } => commands::eval::run(
            est.as_deref(),
            sample.as_deref(),
            report.as_deref(),
            est_dir.as_deref(),
            samples.as_deref(),
            &out,
        ),
        Command::Ablate {
            suite,
            samples,
            out,
            seed,
            config,
        } => commands::ablate::run(suite, &samples, &out, seed, config.as_deref()),
        Command::Bench {
            sizes,
            methods,
            out,
            seed,
            config,
        } => commands::bench::run(&sizes, &methods, &out, seed, config.as_deref()),
        Command::Landscape {
            sample,
            method,
            grid,
            radius,
            out,
            seed,
            config,
        } => commands::landscape::run(&sample, method, grid, radius, &out, seed, config.as_deref()),
        Command::Probe {
            sizes,
            trials,
            out,
            seed,
            config,
        } => commands::probe::run(&sizes, trials, &out, seed, config.as_deref()),
    }
}
