//! Continues a checkpointed trajectory and records its observables.

use super::ergodicity::{observable_names, observe};
use super::step_count;
use crate::checkpoint::{Checkpoint, Snapshot};
use crate::error::Result;
use crate::report::{Report, Series};
use wcgl_core::besov::DyadicPartition;

/// Advances the stored state to `until` (the config horizon by default),
/// sampling every `ergodicity.sample_every` steps. Returns the report and the
/// final checkpoint.
pub fn run(ck: &Checkpoint, until: Option<f64>) -> Result<(Report, Checkpoint)> {
    let cfg = &ck.config;
    let until = until.unwrap_or(cfg.horizon);
    let t0 = ck.snapshot.primary().t;
    let steps = if until > t0 { step_count(until - t0, cfg.dt) } else { 0 };
    let every = cfg.ergodicity.sample_every;
    let mut rep = Report::new("resume", cfg.seed, cfg.to_toml());
    rep.notes.push(format!("resumed at t = {t0} and advanced {steps} steps of {}", cfg.dt));
    let snapshot = match &ck.snapshot {
        Snapshot::Single(s0) => {
            let part = DyadicPartition::new(s0.cfg.grid);
            let names = observable_names(cfg);
            let mut cols: Vec<&str> = vec!["t"];
            cols.extend(names.iter().map(|s| s.as_str()));
            let mut series = Series::new("trajectory", &cols);
            let mut s = s0.clone();
            for step in 1..=steps {
                s = s.step(cfg.dt)?;
                if step % every == 0 || step == steps {
                    let mut row = vec![s.t];
                    row.extend(observe(cfg, &s.u(), &part)?);
                    series.push(row);
                }
            }
            rep.series.push(series);
            Snapshot::Single(s)
        }
        Snapshot::Coupled(c0) => {
            let mut series = Series::new("trajectory", &["t", "log_diff_l2_sq"]);
            let mut c = c0.clone();
            for step in 1..=steps {
                c = c.step(cfg.dt)?;
                if step % every == 0 || step == steps {
                    series.push(vec![c.t(), c.log_diff_norm_sq()]);
                }
            }
            rep.series.push(series);
            Snapshot::Coupled(c)
        }
    };
    Ok((rep, Checkpoint { config: cfg.clone(), snapshot }))
}
