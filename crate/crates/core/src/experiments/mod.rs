//! Seeded, resumable Monte Carlo experiments.
//!
//! Each runner is a deterministic function of (config, root seed): per-
//! sample seeds come from the seed tree keyed by sample index, parallel
//! maps collect in index order, and aggregation is sequential, so two runs
//! of the same config produce identical records. Raw per-sample rows can be
//! spilled to a [`record::ScatterStore`]; a truncated store resumes from
//! its cursor with no change to the final record.

pub mod config;
pub mod gmcnorm;
pub mod maintheorem;
pub mod mink;
pub mod onepoint;
pub mod record;
pub mod sigma;
pub mod stats;
pub mod twopoint;

use std::path::Path;

pub use config::ExperimentConfig;
pub use record::{persist, Estimate, ResultRecord, ScatterStore};

use crate::error::{Error, Result};
use crate::loewner::{sample_driving, DrivingPath};
use crate::params::KappaParams;
use crate::seeds::{leaf_seed, Stream};

/// Driver for Monte Carlo sample `index`, extended per the config policy.
pub(crate) fn sample_curve(
    cfg: &ExperimentConfig,
    params: &KappaParams,
    index: usize,
) -> Result<DrivingPath> {
    let seed = leaf_seed(cfg.seed, Stream::Scatter, index as u64);
    Ok(sample_driving(params, cfg.horizon, cfg.dt, seed)?.extended(cfg.extension))
}

/// Base (unextended) driver for sample `index`; shares the extended
/// driver's prefix bit for bit.
pub(crate) fn sample_curve_base(
    cfg: &ExperimentConfig,
    params: &KappaParams,
    index: usize,
) -> Result<DrivingPath> {
    let seed = leaf_seed(cfg.seed, Stream::Scatter, index as u64);
    sample_driving(params, cfg.horizon, cfg.dt, seed)
}

/// Run the named experiment. Scatter stores (when a directory is given)
/// hold per-sample rows for resume.
pub fn run(
    experiment: &str,
    cfg: &ExperimentConfig,
    scatter_dir: Option<&Path>,
) -> Result<ResultRecord> {
    let started = std::time::Instant::now();
    let mut record = match experiment {
        "onepoint" => onepoint::run_onepoint_green(cfg, scatter_dir)?,
        "mink-lr" => mink::run_minkowski_lr(cfg, scatter_dir)?,
        "k-kappa" => mink::run_k_kappa(cfg, scatter_dir)?,
        "sigma-conv" => sigma::run_sigma_convergence(cfg, scatter_dir)?,
        "gmc-norm" => gmcnorm::run_gmc_normalization(cfg)?,
        "main-theorem" => maintheorem::run_main_theorem(cfg, scatter_dir)?,
        "critical" => maintheorem::run_critical_theorem(cfg, scatter_dir)?,
        "two-point" => twopoint::run_two_point_scaling(cfg, scatter_dir)?,
        other => {
            return Err(Error::Config(format!("unknown experiment '{other}'")));
        }
    };
    record.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    Ok(record)
}

/// Experiments the CLI can dispatch to.
pub const EXPERIMENTS: &[&str] = &[
    "onepoint",
    "mink-lr",
    "k-kappa",
    "sigma-conv",
    "gmc-norm",
    "main-theorem",
    "critical",
    "two-point",
];
