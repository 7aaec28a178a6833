//! Long runs from rough data: blow-up events, the small-time envelope of
//! `||v_t||_{L^{2p}}`, uniformity over initial data, and numerical
//! consistency diagnostics of the scheme.

use super::{capped_power, negative_holder, renormalization, rough_datum, solver_config, step_count};
use crate::config::Config;
use crate::ensemble;
use crate::error::{HarnessError, Result};
use crate::report::{Event, Report, Series};
use crate::stats::{mean, std_error};
use wcgl_core::besov::DyadicPartition;
use wcgl_core::noise::{coarsen_increments, NoiseStream, OuState};
use wcgl_core::params::ModelParams;
use wcgl_core::solver::{energy_report, gradient_terms, picard_horizon, Drift, Forcing, SolverConfig, SolverState};
use wcgl_core::spectral::{rho, GridSpec, Mode, SpectralField};
use wcgl_core::C64;

/// Result of one ensemble member.
#[derive(Clone, Debug)]
pub struct Member {
    /// `(t, ||v||_{L^2})` of a blow-up.
    pub blowup: Option<(f64, f64)>,
    /// `sup_{t <= t_env} t^{p/m} ||v_t||^{2p}_{L^{2p}}` for each `p`.
    pub envelope: Vec<f64>,
    /// `sup_t ||v_t||_{L^{2p}}` for each `p`.
    pub sup_norm: Vec<f64>,
    /// `(t, ||v_t||^2_{L^2})` every `record_every` steps.
    pub trace: Vec<(f64, f64)>,
    /// Five remainders spread over the run, kept for the quadratic-form check.
    pub states: Vec<SpectralField>,
    /// Time averages of `|u(k)|^2` over `[T/2, T]` for the linear regime.
    pub mode_averages: Vec<f64>,
}

fn l2p_norm_pow(v: &SpectralField, p: f64) -> f64 {
    if p == 1.0 {
        v.l2_norm_sq()
    } else {
        v.to_physical().lp_norm(2.0 * p).powf(2.0 * p)
    }
}

pub(crate) fn variance_modes(cutoff: usize, radius: usize) -> Vec<Mode> {
    let r = radius.min(cutoff) as i64;
    (-r..=r).flat_map(|a| (-r..=r).map(move |b| Mode(a, b))).collect()
}

/// Runs the main ensemble: member `i` starts from a stationary OU sample and
/// is driven by trajectory `i` of the seed.
pub fn run_ensemble(cfg: &Config) -> Result<Vec<Member>> {
    let grid = cfg.grid()?;
    let sc = solver_config(cfg, grid, Drift::Renormalized)?;
    let w = &cfg.wellposedness;
    let m = cfg.model.m as f64;
    let steps = step_count(cfg.horizon, cfg.dt);
    let linear = cfg.model.is_linear();
    let vmodes = variance_modes(grid.cutoff(), cfg.ergodicity.variance_radius);
    ensemble::run(cfg.ensemble, |i| -> Result<Member> {
        let u0 = rough_datum(grid, cfg.model.mu, cfg.seed, i as u64);
        let mut s = SolverState::new(sc, u0, NoiseStream::new(cfg.seed, i as u64))?;
        let np = cfg.p_list.len();
        let mut out = Member {
            blowup: None,
            envelope: vec![0.0; np],
            sup_norm: cfg.p_list.iter().map(|&p| l2p_norm_pow(&s.v, p).powf(0.5 / p)).collect(),
            trace: vec![(0.0, s.v.l2_norm_sq())],
            states: Vec::new(),
            mode_averages: vec![0.0; vmodes.len()],
        };
        let mut averaged = 0usize;
        let keep_every = (steps / 5).max(1);
        for step in 1..=steps {
            s = match s.step(cfg.dt) {
                Ok(n) => n,
                Err(wcgl_core::Error::BlowUp { t, norm }) => {
                    out.blowup = Some((t, norm));
                    return Ok(out);
                }
                Err(e) => return Err(e.into()),
            };
            let t = s.t;
            for (j, &p) in cfg.p_list.iter().enumerate() {
                let early = t <= w.envelope_time * (1.0 + 1e-12);
                let fine = step % w.record_every == 0;
                if early || fine {
                    let a = l2p_norm_pow(&s.v, p);
                    out.sup_norm[j] = out.sup_norm[j].max(a.powf(0.5 / p));
                    if early {
                        out.envelope[j] = out.envelope[j].max(t.powf(p / m) * a);
                    }
                }
            }
            if step % w.record_every == 0 {
                out.trace.push((t, s.v.l2_norm_sq()));
            }
            if step % keep_every == 0 && out.states.len() < 5 {
                out.states.push(s.v.clone());
            }
            if linear && 2 * step > steps {
                let u = s.u();
                for (a, &k) in out.mode_averages.iter_mut().zip(&vmodes) {
                    *a += u.get(k).norm_sqr();
                }
                averaged += 1;
            }
        }
        out.mode_averages.iter_mut().for_each(|a| *a /= averaged.max(1) as f64);
        Ok(out)
    })
    .into_iter()
    .collect()
}

/// Smallest value of `form - delta* diss` over the given remainders, where
/// `form` is the gradient term of the `L^{2p}` balance and `diss` the
/// dissipation it has to dominate.
pub fn quadratic_form_margin(states: &[SpectralField], params: &ModelParams, p: f64) -> Result<f64> {
    let frac = params.dissipation_fraction(p);
    let mut worst = f64::INFINITY;
    for v in states {
        let (form, diss) = gradient_terms(v, params.mu, p)?;
        worst = worst.min(form - frac * diss);
    }
    Ok(worst)
}

/// Whether blow-up is excluded for these parameters.
pub fn blowup_excluded(p: &ModelParams) -> bool {
    p.is_linear() || 2.0 + 2.0 * p.mu * (p.mu + (1.0 + p.mu * p.mu).sqrt()) > (2 * p.m + 1) as f64
}

pub fn run(cfg: &Config) -> Result<Report> {
    let mut rep = Report::new("wellposedness", cfg.seed, cfg.to_toml());
    let members = run_ensemble(cfg)?;
    summarize(cfg, &members, &mut rep)?;
    family(cfg, &mut rep)?;
    if cfg.wellposedness.diagnostics {
        diagnostics(cfg, &mut rep)?;
    }
    if cfg.wellposedness.renormalization_ensemble > 0 {
        renormalization::run_into(cfg, &mut rep)?;
    }
    Ok(rep)
}

pub fn summarize(cfg: &Config, members: &[Member], rep: &mut Report) -> Result<()> {
    let w = &cfg.wellposedness;
    let n = members.len();
    let blowups: Vec<(usize, (f64, f64))> =
        members.iter().enumerate().filter_map(|(i, m)| m.blowup.map(|b| (i, b))).collect();
    for &(i, (t, norm)) in &blowups {
        rep.events.push(Event { kind: "blow-up".into(), member: i as u64, t, detail: format!("||v||_L2 = {norm:.3e}") });
    }
    if blowup_excluded(&cfg.model) {
        rep.unexpected_blowups += blowups.len();
    }
    rep.check("no_blowup", blowups.is_empty(), blowups.len() as f64, "blow-up events == 0", n);

    let mut sup = Series::new("sup_norms", &["member", "p", "sup_l2p", "envelope"]);
    for (i, mb) in members.iter().enumerate() {
        for (j, &p) in cfg.p_list.iter().enumerate() {
            sup.push(vec![i as f64, p, mb.sup_norm[j], mb.envelope[j]]);
        }
    }
    rep.series.push(sup);
    for (j, &p) in cfg.p_list.iter().enumerate() {
        let worst = members.iter().map(|m| m.envelope[j]).fold(0.0, f64::max);
        rep.check_with(
            format!("envelope_p{p}"),
            worst.is_finite() && worst <= w.envelope_bound,
            worst,
            format!("max over members of sup_(t <= {}) t^(p/m) ||v_t||^(2p)_L(2p) <= {}", w.envelope_time, w.envelope_bound),
            n,
            "rough initial data: stationary OU samples",
        );
    }

    let mut trace = Series::new("mean_l2", &["t", "mean_v_l2_sq", "se", "members"]);
    let rows = members.iter().map(|m| m.trace.len()).max().unwrap_or(0);
    for r in 0..rows {
        let vals: Vec<f64> = members.iter().filter_map(|m| m.trace.get(r).map(|x| x.1)).collect();
        let t = members.iter().find_map(|m| m.trace.get(r).map(|x| x.0)).unwrap_or(f64::NAN);
        let se = if vals.len() > 1 { std_error(&vals) } else { f64::NAN };
        trace.push(vec![t, mean(&vals), se, vals.len() as f64]);
    }
    rep.series.push(trace);

    let states: Vec<SpectralField> = members.iter().flat_map(|m| m.states.iter().cloned()).collect();
    if !states.is_empty() {
        for &p in &cfg.p_list {
            let margin = quadratic_form_margin(&states, &cfg.model, p)?;
            rep.check_with(
                format!("quadratic_form_p{p}"),
                margin >= -1e-10,
                margin,
                "min over states of form - delta* diss >= -1e-10",
                states.len(),
                format!("delta* = {:.6}", cfg.model.dissipation_fraction(p)),
            );
        }
    }

    if cfg.model.is_linear() && members.iter().all(|m| m.blowup.is_none()) && n > 1 {
        linear_variances(cfg, members, rep)?;
    }
    Ok(())
}

fn linear_variances(cfg: &Config, members: &[Member], rep: &mut Report) -> Result<()> {
    let grid = cfg.grid()?;
    let modes = variance_modes(grid.cutoff(), cfg.ergodicity.variance_radius);
    let mut table = Series::new("linear_variances", &["k1", "k2", "estimate", "se", "exact"]);
    let mut worst: f64 = 0.0;
    for (j, &k) in modes.iter().enumerate() {
        let vals: Vec<f64> = members.iter().map(|m| m.mode_averages[j]).collect();
        let (e, se) = (mean(&vals), std_error(&vals));
        let exact = 0.5 / rho(k, cfg.model.mu);
        worst = worst.max((e - exact).abs() / se);
        table.push(vec![k.0 as f64, k.1 as f64, e, se, exact]);
    }
    rep.series.push(table);
    rep.check_with(
        "linear_variances",
        worst <= 3.0,
        worst,
        "max over |k|_inf <= r of |estimate - 1/(2 rho_k)| / SE <= 3",
        members.len(),
        format!("{} modes; per-member time averages over [T/2, T]", modes.len()),
    );
    Ok(())
}

/// Weighted moments `sup_t (t^{p/m} ^ 1) E||u_t||^p_{C^{-alpha}}` for a small
/// family of initial data driven by the same noise.
fn family(cfg: &Config, rep: &mut Report) -> Result<()> {
    let w = &cfg.wellposedness;
    if w.family_members == 0 {
        return Ok(());
    }
    let grid = cfg.grid()?;
    let sc = solver_config(cfg, grid, Drift::Renormalized)?;
    let part = DyadicPartition::new(grid);
    let alpha = cfg.exponents().alpha;
    let mu = cfg.model.mu;
    let m = cfg.model.m as f64;
    let steps = step_count(w.family_horizon.min(cfg.horizon), cfg.dt);
    let inits = ["zero", "rough", "rough_x2", "constant"];
    let offset = cfg.ensemble as u64;
    let mut series = Series::new("initial_data_family", &["init", "p", "weighted_moment"]);
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cfg.p_list.len()];
    for (ii, name) in inits.iter().enumerate() {
        let traces = ensemble::run(w.family_members, |j| -> Result<Vec<(f64, f64)>> {
            let traj = offset + j as u64;
            let rough = rough_datum(grid, mu, cfg.seed, traj);
            let u0 = match *name {
                "zero" => SpectralField::zeros(grid),
                "rough" => rough,
                "rough_x2" => rough.scale(C64::new(2.0, 0.0)),
                _ => SpectralField::constant(grid, C64::new(w.init_amplitude, 0.0)),
            };
            let mut s = SolverState::new(sc, u0, NoiseStream::new(cfg.seed, traj))?;
            let mut trace = Vec::new();
            for step in 1..=steps {
                s = s.step(cfg.dt)?;
                if step % w.record_every == 0 || step == steps {
                    trace.push((s.t, negative_holder(&s.u(), alpha, &part)?));
                }
            }
            Ok(trace)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>();
        let traces = match traces {
            Ok(t) => t,
            Err(e) if e.is_blowup() => {
                if let HarnessError::Core(wcgl_core::Error::BlowUp { t, norm }) = e {
                    rep.events.push(Event { kind: "blow-up".into(), member: ii as u64, t, detail: format!("family {name}, ||v|| = {norm:.3e}") });
                    if blowup_excluded(&cfg.model) {
                        rep.unexpected_blowups += 1;
                    }
                }
                for v in values.iter_mut() {
                    v.push(f64::INFINITY);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        for (j, &p) in cfg.p_list.iter().enumerate() {
            let mut best: f64 = 0.0;
            for r in 0..traces[0].len() {
                let t = traces[0][r].0;
                let vals: Vec<f64> = traces.iter().map(|tr| tr[r].1.powf(p)).collect();
                best = best.max(capped_power(t, p / m) * mean(&vals));
            }
            series.push(vec![ii as f64, p, best]);
            values[j].push(best);
        }
    }
    rep.series.push(series);
    rep.notes.push("initial_data_family rows use init codes 0 = zero, 1 = rough, 2 = twice rough, 3 = constant".into());
    for (j, &p) in cfg.p_list.iter().enumerate() {
        let v = &values[j];
        let (lo, hi) = (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(0.0, f64::max));
        let ratio = hi / lo;
        rep.check_with(
            format!("uniform_in_initial_data_p{p}"),
            ratio.is_finite() && ratio <= w.family_ratio_bound,
            ratio,
            format!("max / min over initial data <= {}", w.family_ratio_bound),
            w.family_members,
            format!("{} initial data, horizon {}", inits.len(), w.family_horizon.min(cfg.horizon)),
        );
    }
    Ok(())
}

fn smooth_field(g: GridSpec, amp: f64) -> SpectralField {
    SpectralField::from_fn(g, |k| C64::from_polar(amp * (-(k.norm_sq()) / 2.0).exp(), 0.7 * k.0 as f64 - 0.3 * k.1 as f64))
}

/// Ratio of energy-balance residuals at steps `delta` and `delta / 2` on a
/// smooth deterministic run; close to 2 for a first-order forward difference.
pub fn energy_residual_ratio(params: ModelParams, cutoff: usize, delta: f64) -> Result<(f64, f64)> {
    let g = GridSpec::for_degree(cutoff, params.m)?;
    let cfg = SolverConfig::new(params, g, Drift::Renormalized, Forcing::Deterministic)?;
    let s = SolverState::new(cfg, smooth_field(g, 1.0), NoiseStream::new(0, 0))?.run_until(0.05, delta)?;
    let r1 = energy_report(&s, 1.0, delta)?.residual();
    let r2 = energy_report(&s, 1.0, delta / 2.0)?.residual();
    Ok((r1, r2))
}

/// Mean observed strong order from successive differences of runs on one
/// fine noise path at strides 16, 8, 4, 2, 1.
pub fn refinement_order(params: ModelParams, cutoff: usize, seed: u64, paths: usize) -> Result<Vec<f64>> {
    let g = GridSpec::for_degree(cutoff, params.m)?;
    let cfg = SolverConfig::new(params, g, Drift::Renormalized, Forcing::Stochastic)?;
    let (t_end, fine_steps) = (0.25, 1024usize);
    let h = t_end / fine_steps as f64;
    let strides = [16usize, 8, 4, 2, 1];
    let per_path = ensemble::run(paths, |path| -> Result<Vec<f64>> {
        let mut rng = NoiseStream::new(seed, path as u64);
        let z0 = OuState::zero_start(g, params.mu, 0.0);
        let fine: Vec<SpectralField> = (0..fine_steps).map(|_| z0.increment_from_draws(h, &rng.next_draws(g))).collect();
        let runs = strides
            .iter()
            .map(|&stride| -> Result<SpectralField> {
                let mut s = SolverState::new(cfg, smooth_field(g, 1.0), NoiseStream::new(0, 0))?;
                for chunk in fine.chunks(stride) {
                    let eta = coarsen_increments(chunk, h, params.mu)?;
                    s = s.step_with_increment(h * stride as f64, &eta)?;
                }
                Ok(s.v)
            })
            .collect::<Result<Vec<_>>>()?;
        runs.windows(2).map(|w| Ok(w[0].sub(&w[1])?.l2_norm_sq())).collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut diffs = vec![0.0; strides.len() - 1];
    for p in &per_path {
        for (d, x) in diffs.iter_mut().zip(p) {
            *d += x;
        }
    }
    Ok(diffs.windows(2).map(|w| (w[0] / w[1]).sqrt().log2()).collect())
}

fn diagnostics(cfg: &Config, rep: &mut Report) -> Result<()> {
    let params = cfg.model;
    let n = cfg.grid.cutoff;

    let (r1, r2) = energy_residual_ratio(params, n.min(8), 1e-3)?;
    let ratio = r1 / r2;
    rep.check_with(
        "energy_residual_ratio",
        (1.8..=2.2).contains(&ratio),
        ratio,
        "residual(1e-3) / residual(5e-4) in [1.8, 2.2]",
        2,
        format!("p = 1, smooth deterministic run, residuals {r1:.3e} and {r2:.3e}"),
    );

    let orders = refinement_order(params, n.min(6), cfg.seed, 8)?;
    let mo = mean(&orders);
    let mut s = Series::new("refinement_orders", &["level", "order"]);
    for (i, o) in orders.iter().enumerate() {
        s.push(vec![i as f64, *o]);
    }
    rep.series.push(s);
    rep.check_with(
        "strong_order",
        (0.8..=1.3).contains(&mo),
        mo,
        "mean observed order in [0.8, 1.3]",
        8,
        "successive differences at strides 16..1 on a shared fine noise path",
    );

    let g = GridSpec::for_degree(n.min(4), params.m)?;
    let sc = SolverConfig::new(params, g, Drift::Renormalized, Forcing::Stochastic)?;
    let mut horizons = Series::new("fixed_point_horizon", &["radius", "horizon"]);
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for r in [1.0, 2.0, 4.0, 8.0] {
        let s = SolverState::new(sc, SpectralField::constant(g, C64::new(r, 0.0)), NoiseStream::new(cfg.seed, 0))?;
        let h = picard_horizon(&s, 1e-3, 2.0, 1e-10, 60);
        monotone &= h <= prev;
        prev = h;
        horizons.push(vec![r, h]);
    }
    rep.series.push(horizons);
    rep.check("fixed_point_horizon_monotone", monotone, prev, "horizon non-increasing as the datum doubles", 4);
    Ok(())
}
