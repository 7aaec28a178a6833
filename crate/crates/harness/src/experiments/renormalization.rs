//! Naive versus Wick-ordered drift under cutoff doubling. The statistic is a
//! low-mode `L^2` proxy, `sum_{|k|_inf <= r} |u(k)|^2`, time-averaged over the
//! second half of the run. Runs at `N` and `2N` share their noise on the
//! common modes, so the shift is measured on paired differences.

use super::{solver_config, step_count};
use crate::config::Config;
use crate::ensemble;
use crate::error::Result;
use crate::report::{Event, Report, Series};
use crate::stats::{mean, std_error};
use wcgl_core::noise::NoiseStream;
use wcgl_core::solver::{Drift, SolverState};
use wcgl_core::spectral::{GridSpec, SpectralField};

#[derive(Clone, Debug, PartialEq)]
pub struct Shift {
    pub drift: Drift,
    pub mean_coarse: f64,
    pub mean_fine: f64,
    pub shift: f64,
    pub se: f64,
    /// Members that completed at both cutoffs.
    pub pairs: usize,
    pub blowups: Vec<(u64, f64)>,
}

impl Shift {
    pub fn z(&self) -> f64 {
        self.shift.abs() / self.se
    }
}

fn proxy(u: &SpectralField, r: i64) -> f64 {
    let mut s = 0.0;
    for a in -r..=r {
        for b in -r..=r {
            s += u.get(wcgl_core::spectral::Mode(a, b)).norm_sqr();
        }
    }
    s
}

fn window_average(cfg: &Config, grid: GridSpec, drift: Drift, member: u64) -> Result<std::result::Result<f64, f64>> {
    let w = &cfg.wellposedness;
    let sc = solver_config(cfg, grid, drift)?;
    let steps = step_count(w.renormalization_horizon, cfg.dt);
    let r = w.proxy_radius as i64;
    let mut s = SolverState::new(sc, SpectralField::zeros(grid), NoiseStream::new(cfg.seed, member))?;
    let (mut acc, mut count) = (0.0, 0usize);
    for step in 1..=steps {
        s = match s.step(cfg.dt) {
            Ok(n) => n,
            Err(wcgl_core::Error::BlowUp { t, .. }) => return Ok(Err(t)),
            Err(e) => return Err(e.into()),
        };
        if 2 * step > steps {
            acc += proxy(&s.u(), r);
            count += 1;
        }
    }
    Ok(Ok(acc / count as f64))
}

pub fn measure(cfg: &Config, drift: Drift) -> Result<Shift> {
    let n = cfg.grid.cutoff;
    let m = cfg.model.m;
    let coarse = GridSpec::for_degree(n, m)?;
    let fine = GridSpec::for_degree(2 * n, m)?;
    let members = cfg.wellposedness.renormalization_ensemble;
    let out = ensemble::run(members, |i| -> Result<(std::result::Result<f64, f64>, std::result::Result<f64, f64>)> {
        Ok((window_average(cfg, coarse, drift, i as u64)?, window_average(cfg, fine, drift, i as u64)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut blowups = Vec::new();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, (c, f)) in out.into_iter().enumerate() {
        match (c, f) {
            (Ok(c), Ok(f)) => {
                a.push(c);
                b.push(f);
            }
            (c, f) => {
                for t in [c.err(), f.err()].into_iter().flatten() {
                    blowups.push((i as u64, t));
                }
            }
        }
    }
    let d: Vec<f64> = b.iter().zip(&a).map(|(f, c)| f - c).collect();
    Ok(Shift {
        drift,
        mean_coarse: mean(&a),
        mean_fine: mean(&b),
        shift: mean(&d),
        se: std_error(&d),
        pairs: d.len(),
        blowups,
    })
}

pub fn run_into(cfg: &Config, rep: &mut Report) -> Result<()> {
    let n = cfg.grid.cutoff;
    let mut table = Series::new("renormalization", &["renormalized", "mean_n", "mean_2n", "shift", "se", "pairs"]);
    for drift in [Drift::Naive, Drift::Renormalized] {
        let s = measure(cfg, drift)?;
        let ren = drift == Drift::Renormalized;
        table.push(vec![ren as u8 as f64, s.mean_coarse, s.mean_fine, s.shift, s.se, s.pairs as f64]);
        for &(member, t) in &s.blowups {
            rep.events.push(Event { kind: "blow-up".into(), member, t, detail: format!("{drift:?} drift, cutoff comparison") });
            if ren {
                rep.unexpected_blowups += 1;
            }
        }
        let detail = format!(
            "proxy radius {}, N = {n} vs {}, window [T/2, T] with T = {}",
            cfg.wellposedness.proxy_radius,
            2 * n,
            cfg.wellposedness.renormalization_horizon
        );
        if ren {
            rep.check_with("renormalized_cutoff_shift", s.z() < 3.0, s.z(), "|shift| / SE < 3", s.pairs, detail);
        } else {
            rep.check_with("naive_cutoff_shift", s.z() > 5.0, s.z(), "|shift| / SE > 5", s.pairs, detail);
        }
    }
    rep.series.push(table);
    Ok(())
}
