//! Monte Carlo study of the stationary Wick powers `W = P_N :Z^k Zbar^l:`:
//! spectrum decay, stationarity in time, stability in the cutoff and the
//! scaling of time increments.

use super::{fmt_order, negative_holder};
use crate::config::Config;
use crate::ensemble;
use crate::error::Result;
use crate::report::{Fit, Report, Series};
use crate::stats::{linear_fit, mean, std_error};
use wcgl_core::besov::DyadicPartition;
use wcgl_core::noise::{NoiseStream, OuState};
use wcgl_core::spectral::{required_pad, rho, GridSpec, SpectralField};
use wcgl_core::wick::{exact_wick_oracle, stationary_constant, WickFamily};

pub fn run(cfg: &Config) -> Result<Report> {
    let mut rep = Report::new("regularity", cfg.seed, cfg.to_toml());
    rep.notes.push("norms are C^{-alpha} Besov norms of the truncated field; moments are plain Monte Carlo means".into());
    for &[k, l] in &cfg.regularity.orders {
        order(cfg, k, l, &mut rep)?;
    }
    Ok(rep)
}

fn wick_power(z: &SpectralField, c: f64, k: usize, l: usize) -> Result<SpectralField> {
    Ok(WickFamily::from_field(z, c, &[(k, l)])?.get(k, l)?)
}

fn grid_for(cfg: &Config, cutoff: usize, k: usize, l: usize) -> Result<GridSpec> {
    let pad = required_pad(k + l).max(cfg.grid.pad.unwrap_or(1));
    Ok(GridSpec::new(cutoff, pad)?)
}

struct Sample {
    power: Vec<f64>,
    norm0: f64,
    norm1: f64,
}

/// Per-mode mean and standard error of `|W(omega)|^2`.
fn mode_moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let modes = samples[0].len();
    let n = samples.len() as f64;
    let mut m1 = vec![0.0; modes];
    let mut m2 = vec![0.0; modes];
    for s in samples {
        for (i, &x) in s.iter().enumerate() {
            m1[i] += x;
            m2[i] += x * x;
        }
    }
    let mean: Vec<f64> = m1.iter().map(|s| s / n).collect();
    let se = m2
        .iter()
        .zip(&mean)
        .map(|(s2, m)| ((s2 / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    (mean, se)
}

fn order(cfg: &Config, k: usize, l: usize, rep: &mut Report) -> Result<()> {
    let r = &cfg.regularity;
    let mu = cfg.model.mu;
    let n = cfg.grid.cutoff;
    let name = fmt_order(k, l);
    let grid = grid_for(cfg, n, k, l)?;
    let c = stationary_constant(grid, mu);
    let part = DyadicPartition::new(grid);
    let seed = cfg.seed;
    let s = r.samples;

    let samples = ensemble::run(s, |i| -> Result<Sample> {
        let mut rng = NoiseStream::new(seed, i as u64);
        let z0 = OuState::sample_stationary(grid, mu, &rng, 0);
        let w0 = wick_power(&z0.z, c, k, l)?;
        let z1 = z0.evolve(1.0, &mut rng)?;
        let w1 = wick_power(&z1.z, c, k, l)?;
        Ok(Sample {
            power: w0.coeffs().iter().map(|x| x.norm_sqr()).collect(),
            norm0: negative_holder(&w0, r.alpha, &part)?,
            norm1: negative_holder(&w1, r.alpha, &part)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Spectrum.
    let powers: Vec<Vec<f64>> = samples.iter().map(|s| s.power.clone()).collect();
    let (m, se) = mode_moments(&powers);
    let mut spec = Series::new(format!("spectrum_{name}"), &["k1", "k2", "abs_k", "mean_sq", "se"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, w) in grid.modes().enumerate() {
        spec.push(vec![w.0 as f64, w.1 as f64, w.norm(), m[i], se[i]]);
        let lin = w.linf() as usize;
        if lin >= 1 && 2 * lin <= n && m[i] > 0.0 {
            xs.push((1.0 + w.norm()).ln());
            ys.push(m[i].ln());
        }
    }
    rep.series.push(spec);
    if xs.len() >= 3 {
        let fit = linear_fit(&xs, &ys);
        rep.fits.push(Fit::new(format!("decay_slope_{name}"), fit, fit.slope_se, "ols"));
        if k + l >= 2 {
            rep.check_with(
                format!("decay_slope_{name}"),
                (-2.3..=-1.7).contains(&fit.slope),
                fit.slope,
                "in [-2.3, -1.7]",
                s,
                format!("log E|W(w)|^2 against log(1+|w|) over 1 <= |w|_inf <= N/2, {} modes", xs.len()),
            );
        }
    }
    if k + l == 1 {
        let z: Vec<f64> = grid.modes().enumerate().map(|(i, w)| (m[i] - 0.5 / rho(w, mu)).abs() / se[i]).collect();
        let within = z.iter().filter(|&&z| z <= 3.0).count() as f64 / z.len() as f64;
        rep.check_with(
            format!("gaussian_variance_{name}"),
            within >= 0.99,
            within,
            "fraction of modes within 3 SE of 1/(2 rho) >= 0.99",
            s,
            format!("{} modes, max |z| = {:.3}", z.len(), z.iter().cloned().fold(0.0, f64::max)),
        );
    } else if k + l <= 4 && n <= 4 {
        let oracle = exact_wick_oracle(k, l, grid, mu, 0.0)?;
        let z: Vec<f64> = oracle.coeffs().iter().zip(&m).zip(&se).map(|((o, m), se)| (m - o.re).abs() / se).collect();
        let worst = z.iter().cloned().fold(0.0, f64::max);
        rep.check_with(
            format!("oracle_{name}"),
            worst <= 4.0,
            worst,
            "max over modes of |MC - exact| / SE <= 4",
            s,
            format!("{} modes against the exact truncated pairing sum", z.len()),
        );
    }

    // Norms: stationarity in time (paired) and stability in the cutoff (independent).
    let n0: Vec<f64> = samples.iter().map(|s| s.norm0).collect();
    let n1: Vec<f64> = samples.iter().map(|s| s.norm1).collect();
    let mut holder = Series::new(format!("holder_{name}"), &["cutoff", "t", "p", "moment", "se"]);
    for &p in &cfg.p_list {
        for (t, v) in [(0.0, &n0), (1.0, &n1)] {
            let pw: Vec<f64> = v.iter().map(|x| x.powf(p)).collect();
            holder.push(vec![n as f64, t, p, mean(&pw), std_error(&pw)]);
        }
    }
    let d: Vec<f64> = n1.iter().zip(&n0).map(|(a, b)| a - b).collect();
    let (dm, dse) = (mean(&d), std_error(&d));
    rep.check_with(
        format!("stationarity_{name}"),
        dm.abs() <= 3.0 * dse,
        dm / dse,
        "|E||W_1|| - E||W_0||| <= 3 SE (paired)",
        s,
        format!("means {:.6} and {:.6}", mean(&n0), mean(&n1)),
    );

    let grid2 = grid_for(cfg, 2 * n, k, l)?;
    let c2 = stationary_constant(grid2, mu);
    let part2 = DyadicPartition::new(grid2);
    let n2 = ensemble::run(s, |i| -> Result<f64> {
        let rng = NoiseStream::new(seed, (s + i) as u64);
        let z = OuState::sample_stationary(grid2, mu, &rng, 0);
        negative_holder(&wick_power(&z.z, c2, k, l)?, r.alpha, &part2)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for &p in &cfg.p_list {
        let pw: Vec<f64> = n2.iter().map(|x| x.powf(p)).collect();
        holder.push(vec![2.0 * n as f64, 0.0, p, mean(&pw), std_error(&pw)]);
    }
    rep.series.push(holder);
    let diff = mean(&n2) - mean(&n0);
    let se2 = (std_error(&n0).powi(2) + std_error(&n2).powi(2)).sqrt();
    rep.check_with(
        format!("cutoff_stability_{name}"),
        diff.abs() <= 3.0 * se2,
        diff / se2,
        "|E||W_2N|| - E||W_N||| <= 3 SE (independent ensembles)",
        s,
        format!("means {:.6} (N) and {:.6} (2N)", mean(&n0), mean(&n2)),
    );

    increments(cfg, k, l, grid, c, &name, rep)
}

/// `S(h) = sup_s mean_{|w|_inf = s} E|W_h(w) - W_0(w)|^2 (1+|w|)^{2-2 lambda}` scales
/// like `h^lambda` when the increments are `lambda`-Holder in time with values in
/// the corresponding negative space.
fn increments(cfg: &Config, k: usize, l: usize, grid: GridSpec, c: f64, name: &str, rep: &mut Report) -> Result<()> {
    let r = &cfg.regularity;
    let mu = cfg.model.mu;
    let n = grid.cutoff();
    let lam = r.time_exponent;
    let offset = 2 * r.samples;
    let seed = cfg.seed;
    let per_sample = ensemble::run(r.increment_samples, |j| -> Result<Vec<Vec<f64>>> {
        let rng = NoiseStream::new(seed, (offset + j) as u64);
        let z0 = OuState::sample_stationary(grid, mu, &rng, 0);
        let w0 = wick_power(&z0.z, c, k, l)?;
        r.lags
            .iter()
            .map(|&h| {
                let zh = z0.evolve(h, &mut rng.clone())?;
                let wh = wick_power(&zh.z, c, k, l)?;
                Ok(wh.coeffs().iter().zip(w0.coeffs()).map(|(a, b)| (a - b).norm_sqr()).collect())
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut series = Series::new(format!("increments_{name}"), &["lag", "statistic"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (li, &h) in r.lags.iter().enumerate() {
        let rows: Vec<Vec<f64>> = per_sample.iter().map(|s| s[li].clone()).collect();
        let (m, _) = mode_moments(&rows);
        let mut shell_sum = vec![0.0; n + 1];
        let mut shell_count = vec![0usize; n + 1];
        for (i, w) in grid.modes().enumerate() {
            let sh = w.linf() as usize;
            shell_sum[sh] += m[i] * (1.0 + w.norm()).powf(2.0 - 2.0 * lam);
            shell_count[sh] += 1;
        }
        let stat = shell_sum.iter().zip(&shell_count).map(|(s, &c)| s / c as f64).fold(0.0, f64::max);
        series.push(vec![h, stat]);
        xs.push(h.ln());
        ys.push(stat.ln());
    }
    rep.series.push(series);
    let fit = linear_fit(&xs, &ys);
    rep.fits.push(Fit::new(format!("increment_slope_{name}"), fit, fit.slope_se, "ols"));
    rep.check_with(
        format!("increment_slope_{name}"),
        (fit.slope - lam).abs() <= 0.15,
        fit.slope,
        format!("|slope - {lam}| <= 0.15"),
        r.increment_samples,
        format!("{} lags in [{:.2e}, {:.2e}]", r.lags.len(), r.lags[0], r.lags[r.lags.len() - 1]),
    );
    Ok(())
}
