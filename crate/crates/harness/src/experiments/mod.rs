//! The experiment pipelines. Every pipeline is a pure function of its
//! config; ensemble member `i` always draws from trajectory `i` of the seed.

pub mod coupling;
pub mod ergodicity;
pub mod regularity;
pub mod renormalization;
pub mod resume;
pub mod verify;
pub mod wellposedness;

use crate::config::{Config, Experiment};
use crate::error::Result;
use crate::report::Report;
use std::path::PathBuf;
use wcgl_core::besov::{holder_norm, DyadicPartition};
use wcgl_core::noise::{NoiseStream, OuState};
use wcgl_core::solver::{Drift, Forcing, SolverConfig};
use wcgl_core::spectral::{GridSpec, SpectralField};

/// Where side outputs (checkpoints) go; `None` keeps a run free of I/O.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub out_dir: Option<PathBuf>,
}

pub fn run(cfg: &Config, ctx: &Context) -> Result<Report> {
    match cfg.experiment {
        Experiment::Regularity => regularity::run(cfg),
        Experiment::Wellposedness => wellposedness::run(cfg),
        Experiment::Coupling => coupling::run(cfg),
        Experiment::Ergodicity => ergodicity::run(cfg, ctx),
        Experiment::Verify => verify::run(cfg.seed),
    }
}

pub(crate) fn solver_config(cfg: &Config, grid: GridSpec, drift: Drift) -> Result<SolverConfig> {
    Ok(SolverConfig::new(cfg.model, grid, drift, Forcing::Stochastic)?)
}

/// A draw of the stationary OU field, the rough initial datum.
pub(crate) fn rough_datum(grid: GridSpec, mu: f64, seed: u64, member: u64) -> SpectralField {
    OuState::sample_stationary(grid, mu, &NoiseStream::new(seed, member), 0).z
}

pub(crate) fn negative_holder(u: &SpectralField, alpha: f64, part: &DyadicPartition) -> Result<f64> {
    Ok(holder_norm(u, -alpha, part)?)
}

/// `min(t^a, 1)`.
pub(crate) fn capped_power(t: f64, a: f64) -> f64 {
    t.powf(a).min(1.0)
}

/// Number of steps of size `dt` needed to reach `horizon`.
pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(0.0) as usize
}

pub(crate) fn fmt_order(k: usize, l: usize) -> String {
    format!("{k}_{l}")
}
