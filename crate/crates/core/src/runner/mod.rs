//! Experiment configuration, simulation loop and log files.

mod config;
mod output;
mod sim;

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

pub use config::{
    AttackerChoice, ExperimentConfig, ParamSpec, Prepared, ScenarioRef, TaskDistribution, PRESETS, RESNET_PROFILE,
    YOLO_PROFILE,
};
pub use output::{
    emit_csv, format_sig9, oracle_csv, preflight, quantize, read_oracle, read_per_group, read_rounds, rounds_csv,
    run_dir, OracleLine, RoundsLine,
};
pub use sim::{draw_tasks, hindsight_group, simulate, RunInfo, SimOutput};

use crate::error::Result;
use crate::policies::PolicyKind;

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "BEXPUCB_OUT";

/// Output root: the config's own, then `$BEXPUCB_OUT`, then `results`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Runs every seed in parallel. Results come back in seed order.
pub fn run_seeds(prepared: &Prepared) -> Result<Vec<SimOutput>> {
    prepared
        .config
        .seeds
        .par_iter()
        .map(|&seed| simulate(prepared, seed))
        .collect()
}

/// Runs every seed and writes its logs below `root`. Returns the run
/// directories in seed order.
pub fn run_experiment(prepared: &Prepared, root: &Path) -> Result<Vec<PathBuf>> {
    preflight(root)?;
    prepared
        .config
        .seeds
        .par_iter()
        .map(|&seed| {
            let out = simulate(prepared, seed)?;
            let dir = run_dir(root, &out);
            emit_csv(&out, &dir)?;
            info!("{} seed {} -> {}", out.info.policy.name(), seed, dir.display());
            Ok(dir)
        })
        .collect()
}

/// Runs every learner on the same environment and seeds.
pub fn sweep(prepared: &Prepared, policies: &[PolicyKind], root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for &kind in policies {
        dirs.extend(run_experiment(&prepared.with_policy(kind), root)?);
    }
    Ok(dirs)
}
