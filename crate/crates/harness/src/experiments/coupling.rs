//! Nudged copies under shared noise: decay rate `C2` of `||w_t||^2_{L^2}`
//! per coupling strength and seed, plus the occupancy of a Wick-norm budget.

use super::{negative_holder, rough_datum, solver_config, step_count};
use crate::config::Config;
use crate::ensemble;
use crate::error::Result;
use crate::report::{Fit, Report, Series};
use crate::stats::{linear_fit, mean, residual_bootstrap_slope_se, variance};
use wcgl_core::besov::DyadicPartition;
use wcgl_core::noise::NoiseStream;
use wcgl_core::solver::{CoupledState, Drift, SolverState};
use wcgl_core::spectral::SpectralField;
use wcgl_core::wick::drift_orders;
use wcgl_core::C64;

#[derive(Clone, Debug)]
pub struct Run {
    pub lambda: f64,
    pub member: usize,
    /// `(t, ln ||w_t||^2)` at the sampled times.
    pub log_diff: Vec<(f64, f64)>,
    /// Fraction of sampled times with the Wick budget below the threshold.
    pub occupancy: f64,
}

impl Run {
    /// `-slope` of `ln ||w||^2` on `[fit_start T, T]` and its bootstrap SE;
    /// `None` when the copies coincide.
    pub fn rate(&self, fit_start: f64, horizon: f64, resamples: usize, seed: u64) -> Option<(f64, f64)> {
        let pts: Vec<&(f64, f64)> =
            self.log_diff.iter().filter(|(t, _)| *t >= fit_start * horizon - 1e-12).collect();
        if pts.len() < 3 || pts.iter().any(|(_, y)| !y.is_finite()) {
            return None;
        }
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let fit = linear_fit(&x, &y);
        let se = residual_bootstrap_slope_se(&x, &y, resamples, seed);
        Some((-fit.slope, se))
    }
}

/// Wick budget `sum_{(i,j)} ||Z^{:i,j:}_t||^gamma_{C^{-alpha}}` over the drift orders.
fn budget(s: &SolverState, alpha: f64, gamma: f64, part: &DyadicPartition) -> Result<f64> {
    let mut b = 0.0;
    for (i, j) in drift_orders(s.cfg.params.m) {
        if i + j == 0 || !s.wick.contains(i, j) {
            continue;
        }
        b += negative_holder(&s.wick.get(i, j)?, alpha, part)?.powf(gamma);
    }
    Ok(b)
}

pub fn run_pairs(cfg: &Config) -> Result<Vec<Run>> {
    let grid = cfg.grid()?;
    let sc = solver_config(cfg, grid, Drift::Renormalized)?;
    let c = &cfg.coupling;
    let part = DyadicPartition::new(grid);
    let alpha = cfg.exponents().alpha;
    let steps = step_count(cfg.horizon, cfg.dt);
    let jobs: Vec<(f64, usize)> =
        cfg.lambda_grid.iter().flat_map(|&l| (0..cfg.ensemble).map(move |i| (l, i))).collect();
    ensemble::run(jobs.len(), |j| -> Result<Run> {
        let (lambda, member) = jobs[j];
        let u0 = rough_datum(grid, cfg.model.mu, cfg.seed, member as u64);
        // Without coupling the copies start together and must stay together.
        let second = if lambda == 0.0 { u0.clone() } else { SpectralField::constant(grid, C64::new(c.second_amplitude, 0.0)) };
        let primary = SolverState::new(sc, u0, NoiseStream::new(cfg.seed, member as u64))?;
        let mut cs = CoupledState::new(primary, second, lambda)?;
        let mut log_diff = vec![(0.0, cs.log_diff_norm_sq())];
        let (mut under, mut sampled) = (0usize, 0usize);
        for step in 1..=steps {
            cs = cs.step(cfg.dt)?;
            if step % c.sample_every == 0 || step == steps {
                log_diff.push((cs.t(), cs.log_diff_norm_sq()));
                if budget(&cs.primary, alpha, c.budget_gamma, &part)? <= c.budget_threshold {
                    under += 1;
                }
                sampled += 1;
            }
        }
        Ok(Run { lambda, member, log_diff, occupancy: under as f64 / sampled as f64 })
    })
    .into_iter()
    .collect()
}

pub fn run(cfg: &Config) -> Result<Report> {
    let mut rep = Report::new("coupling", cfg.seed, cfg.to_toml());
    let runs = run_pairs(cfg)?;
    summarize(cfg, &runs, &mut rep);
    Ok(rep)
}

pub fn summarize(cfg: &Config, runs: &[Run], rep: &mut Report) {
    let c = &cfg.coupling;
    let mut table = Series::new("rates", &["lambda", "member", "c2", "c2_se", "occupancy"]);
    let mut curve = Series::new("rate_curve", &["lambda", "mean_c2", "se", "positive_fraction", "cv", "mean_occupancy"]);
    let mut lambdas: Vec<f64> = cfg.lambda_grid.clone();
    lambdas.dedup();
    let mut summary = Vec::new();
    for &lambda in &lambdas {
        let rs: Vec<&Run> = runs.iter().filter(|r| r.lambda == lambda).collect();
        if lambda == 0.0 {
            let coincide = rs.iter().all(|r| r.log_diff.iter().all(|(_, y)| *y == f64::NEG_INFINITY));
            rep.check("identical_copies_lambda_0", coincide, rs.len() as f64, "w == 0 at every sampled time", rs.len());
            continue;
        }
        let mut rates = Vec::new();
        let mut fit_var = Vec::new();
        for r in &rs {
            let seed = cfg.seed ^ ((r.member as u64) << 20) ^ lambda.to_bits();
            let (rate, se) = r.rate(c.fit_start, cfg.horizon, c.bootstrap, seed).unwrap_or((f64::NAN, f64::NAN));
            table.push(vec![lambda, r.member as f64, rate, se, r.occupancy]);
            rates.push(rate);
            fit_var.push(se * se);
        }
        let n = rates.len() as f64;
        let m = mean(&rates);
        // Seed scatter plus the average fit uncertainty, both for the mean over seeds.
        let se = ((if rates.len() > 1 { variance(&rates) } else { 0.0 } + mean(&fit_var)) / n).sqrt();
        let positive = rates.iter().filter(|&&r| r > 0.0).count();
        let cv = if rates.len() > 1 { variance(&rates).sqrt() / m.abs() } else { 0.0 };
        let occ = mean(&rs.iter().map(|r| r.occupancy).collect::<Vec<_>>());
        curve.push(vec![lambda, m, se, positive as f64 / n, cv, occ]);
        if let Some(fit) = fit_pooled(&rs, c.fit_start, cfg.horizon) {
            rep.fits.push(Fit::new(format!("log_diff_pooled_lambda_{lambda}"), fit, fit.slope_se, "ols on pooled seeds"));
        }
        if lambda >= c.check_lambda {
            rep.check(format!("positive_rate_lambda_{lambda}"), positive == rates.len(), positive as f64, "C2 > 0 for every seed", rates.len());
        }
        rep.check_with(
            format!("rate_cv_lambda_{lambda}"),
            cv < c.max_cv,
            cv,
            format!("coefficient of variation of C2 across seeds < {}", c.max_cv),
            rates.len(),
            format!("mean C2 = {m:.4}"),
        );
        summary.push((lambda, m, se));
    }
    for w in summary.windows(2) {
        let ((l0, m0, s0), (l1, m1, s1)) = (w[0], w[1]);
        if l1 <= l0 {
            continue;
        }
        let tol = (s0 * s0 + s1 * s1).sqrt();
        rep.check_with(
            format!("rate_monotone_{l0}_{l1}"),
            m1 >= m0 - tol,
            m1 - m0,
            "C2(lambda') - C2(lambda) >= -combined SE",
            cfg.ensemble,
            format!("C2 {m0:.4} -> {m1:.4}, combined SE {tol:.4}"),
        );
    }
    rep.series.push(table);
    rep.series.push(curve);
    rep.notes.push(format!(
        "rates fitted by least squares on [{} T, T]; SE by residual bootstrap with {} resamples; occupancy uses the budget sum ||Z^(i,j)||^{} in C^(-alpha) against {}",
        c.fit_start, c.bootstrap, c.budget_gamma, c.budget_threshold
    ));
}

fn fit_pooled(rs: &[&Run], fit_start: f64, horizon: f64) -> Option<crate::stats::LinearFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in rs {
        for &(t, v) in &r.log_diff {
            if t >= fit_start * horizon - 1e-12 && v.is_finite() {
                x.push(t);
                y.push(v);
            }
        }
    }
    (x.len() >= 3).then(|| linear_fit(&x, &y))
}
