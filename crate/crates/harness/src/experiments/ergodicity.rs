//! Two long chains from far-apart initial data with independent noise. Their
//! time averages estimate integrals against the empirical (Krylov-Bogoliubov)
//! measures; agreement is the numerical footprint of a unique invariant
//! measure. This is a consequence-level check: the uniqueness argument itself
//! couples the chains under shared noise, which is what `coupling` measures.

use super::wellposedness::variance_modes;
use super::{negative_holder, solver_config, step_count, Context};
use crate::checkpoint::{Checkpoint, Snapshot};
use crate::config::{Config, Observable};
use crate::ensemble;
use crate::error::Result;
use crate::report::{Report, Series};
use crate::stats::{batch_means_se, block_bootstrap_ci, block_length, histogram, mean};
use wcgl_core::besov::DyadicPartition;
use wcgl_core::noise::NoiseStream;
use wcgl_core::solver::{Drift, SolverState};
use wcgl_core::spectral::{rho, Mode, SpectralField};
use wcgl_core::C64;

pub const CHAINS: [&str; 2] = ["a", "b"];

/// Names of the tracked observables, in report order.
pub fn observable_names(cfg: &Config) -> Vec<String> {
    let mut v = Vec::new();
    for o in &cfg.observables {
        match o {
            Observable::L2Norm => v.push("l2_norm".to_string()),
            Observable::HolderNorm => v.push("holder_norm".to_string()),
            Observable::LowModes => {
                for k in cfg.ergodicity.mode_list() {
                    v.push(format!("mode_{}_{}", k.0, k.1));
                }
            }
        }
    }
    v
}

/// Observable values of `u` in the order of [`observable_names`].
pub fn observe(cfg: &Config, u: &SpectralField, part: &DyadicPartition) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for o in &cfg.observables {
        match o {
            Observable::L2Norm => v.push(u.l2_norm_sq()),
            Observable::HolderNorm => v.push(negative_holder(u, cfg.exponents().alpha, part)?),
            Observable::LowModes => {
                for k in cfg.ergodicity.mode_list() {
                    v.push(u.get(k).norm_sqr());
                }
            }
        }
    }
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct Chain {
    /// One time series per observable, sampled after burn-in.
    pub series: Vec<Vec<f64>>,
    /// `|u(k)|^2` series for the exact-variance check (linear regime only).
    pub mode_series: Vec<Vec<f64>>,
    pub final_state: SolverState,
}

pub fn run_chain(cfg: &Config, chain: usize, ctx: &Context) -> Result<Chain> {
    let grid = cfg.grid()?;
    let sc = solver_config(cfg, grid, Drift::Renormalized)?;
    let e = &cfg.ergodicity;
    let part = DyadicPartition::new(grid);
    let u0 = if chain == 0 { SpectralField::zeros(grid) } else { SpectralField::constant(grid, C64::new(e.amplitude, 0.0)) };
    let mut s = SolverState::new(sc, u0, NoiseStream::new(cfg.seed, chain as u64))?;
    let steps = step_count(cfg.horizon, cfg.dt);
    let burn = (e.burn_in * steps as f64).floor() as usize;
    let vmodes: Vec<Mode> =
        if cfg.model.is_linear() { variance_modes(grid.cutoff(), e.variance_radius) } else { Vec::new() };
    let names = observable_names(cfg);
    let mut series = vec![Vec::new(); names.len()];
    let mut mode_series = vec![Vec::new(); vmodes.len()];
    if let Some(dir) = &ctx.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::HarnessError::io(dir, e))?;
    }
    let mut pending: Vec<f64> = cfg.checkpoint.at.clone();
    pending.sort_by(|a, b| a.total_cmp(b));
    let mut pending = pending.into_iter().peekable();
    for step in 1..=steps {
        s = s.step(cfg.dt)?;
        if step > burn && (step - burn) % e.sample_every == 0 {
            let u = s.u();
            for (dst, x) in series.iter_mut().zip(observe(cfg, &u, &part)?) {
                dst.push(x);
            }
            for (dst, &k) in mode_series.iter_mut().zip(&vmodes) {
                dst.push(u.get(k).norm_sqr());
            }
        }
        while let Some(&tc) = pending.peek() {
            if s.t < tc - 1e-9 {
                break;
            }
            pending.next();
            if let Some(dir) = &ctx.out_dir {
                let path = dir.join(format!("ergodicity_chain_{}_t{}.ckpt", CHAINS[chain], tc));
                Checkpoint { config: cfg.clone(), snapshot: Snapshot::Single(s.clone()) }.save(&path)?;
            }
        }
    }
    if let Some(dir) = &ctx.out_dir {
        let path = dir.join(format!("ergodicity_chain_{}_final.ckpt", CHAINS[chain]));
        Checkpoint { config: cfg.clone(), snapshot: Snapshot::Single(s.clone()) }.save(&path)?;
    }
    Ok(Chain { series, mode_series, final_state: s })
}

pub fn run(cfg: &Config, ctx: &Context) -> Result<Report> {
    let chains = ensemble::run(2, |c| run_chain(cfg, c, ctx)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut rep = Report::new("ergodicity", cfg.seed, cfg.to_toml());
    summarize(cfg, &chains, &mut rep);
    Ok(rep)
}

pub fn summarize(cfg: &Config, chains: &[Chain], rep: &mut Report) {
    let e = &cfg.ergodicity;
    let names = observable_names(cfg);
    rep.notes.push(format!(
        "burn-in: first {:.0}% of the horizon ({} of {}); chain a starts at 0, chain b at the constant {}; noise streams are independent",
        100.0 * e.burn_in,
        e.burn_in * cfg.horizon,
        cfg.horizon,
        e.amplitude
    ));
    let mut table = Series::new("time_averages", &["observable", "chain", "mean", "ci_lo", "ci_hi", "half_ci_width", "samples", "block"]);
    for (oi, name) in names.iter().enumerate() {
        let (a, b) = (&chains[0].series[oi], &chains[1].series[oi]);
        if a.len() < 4 || b.len() < 4 {
            rep.check(format!("agree_{name}"), false, f64::NAN, "at least 4 samples per chain", a.len().min(b.len()));
            continue;
        }
        let block = block_length(a).max(block_length(b));
        let mut cis = Vec::new();
        for (ci, x) in [a, b].into_iter().enumerate() {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((oi * 2 + ci) as u64);
            let (lo, hi) = block_bootstrap_ci(x, block, e.bootstrap, seed);
            let half = &x[..x.len() / 2];
            let (hlo, hhi) = block_bootstrap_ci(half, block, e.bootstrap, seed ^ 0x5555);
            table.push(vec![oi as f64, ci as f64, mean(x), lo, hi, hhi - hlo, x.len() as f64, block as f64]);
            cis.push((lo, hi));
        }
        let gap = cis[0].0.max(cis[1].0) - cis[0].1.min(cis[1].1);
        rep.check_with(
            format!("agree_{name}"),
            gap <= 0.0,
            gap,
            "95% block-bootstrap CIs of the two chains overlap (gap <= 0)",
            a.len().min(b.len()),
            format!("means {:.6} and {:.6}, block {block}, {} resamples", mean(a), mean(b), e.bootstrap),
        );
    }
    rep.series.push(table);
    rep.notes.push(format!("time_averages rows index observables in the order {names:?}; half_ci_width is the CI width from the first half of the samples"));

    if let Some(hi) = names.iter().position(|n| n == "holder_norm") {
        let (a, b) = (&chains[0].series[hi], &chains[1].series[hi]);
        if !a.is_empty() && !b.is_empty() {
            let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
            let up = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
            let up = if up > lo { up } else { lo + 1.0 };
            let (ha, hb) = (histogram(a, lo, up, e.bins), histogram(b, lo, up, e.bins));
            let mut h = Series::new("holder_histogram", &["bin_lo", "bin_hi", "chain_a", "chain_b"]);
            let w = (up - lo) / e.bins as f64;
            for i in 0..e.bins {
                h.push(vec![lo + i as f64 * w, lo + (i + 1) as f64 * w, ha[i], hb[i]]);
            }
            rep.series.push(h);
            let tv = 0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>();
            rep.notes.push(format!("total variation distance between the holder_norm histograms: {tv:.4}"));
        }
    }

    if cfg.model.is_linear() {
        let grid = chains[0].final_state.cfg.grid;
        let modes = variance_modes(grid.cutoff(), e.variance_radius);
        let mut t = Series::new("linear_variances", &["k1", "k2", "estimate", "se", "exact"]);
        let mut worst: f64 = 0.0;
        let s = &chains[0].mode_series;
        for (j, &k) in modes.iter().enumerate() {
            let est = mean(&s[j]);
            let se = batch_means_se(&s[j], e.batches);
            let exact = 0.5 / rho(k, cfg.model.mu);
            worst = worst.max((est - exact).abs() / se);
            t.push(vec![k.0 as f64, k.1 as f64, est, se, exact]);
        }
        rep.series.push(t);
        rep.check_with(
            "linear_variances",
            worst <= 3.0,
            worst,
            "max over |k|_inf <= r of |time average - 1/(2 rho_k)| / SE <= 3",
            s.first().map_or(0, |x| x.len()),
            format!("chain a, {} modes, SE by {} batch means", modes.len(), e.batches),
        );
    }
}
