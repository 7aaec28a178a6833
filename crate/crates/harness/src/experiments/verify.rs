//! Fast invariant suite: transforms, partition, Wick algebra, the solver's
//! consistency properties and persistence. Seeded, so two runs with the same
//! seed produce byte-identical reports.

use crate::checkpoint::{Checkpoint, Snapshot};
use crate::config::{Config, Experiment, GridSection};
use crate::error::Result;
use crate::report::Report;
use crate::stats::{mean, std_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wcgl_core::besov::{chi, constant_norm, DyadicPartition};
use wcgl_core::noise::{NoiseStream, OuState};
use wcgl_core::params::ModelParams;
use wcgl_core::solver::{CoupledState, Drift, Forcing, SolverConfig, SolverState};
use wcgl_core::spectral::{GridSpec, SpectralField};
use wcgl_core::wick::{exact_wick_oracle, factorial, stationary_constant, wick_point, WickFamily};
use wcgl_core::C64;

/// The configuration echoed into verify reports and checkpoints.
pub fn default_config(seed: u64) -> Config {
    Config {
        experiment: Experiment::Verify,
        seed,
        horizon: 0.1,
        dt: 0.005,
        ensemble: 4,
        observables: vec![],
        output_dir: "out".into(),
        lambda_grid: vec![0.0],
        p_list: vec![1.0],
        model: ModelParams::new(1.0, C64::new(1.0, 0.3), C64::new(0.2, 0.0), 1).expect("valid"),
        grid: GridSection { cutoff: 4, pad: None, accept_aliasing: false },
        exponents: None,
        regularity: Default::default(),
        wellposedness: Default::default(),
        coupling: Default::default(),
        ergodicity: Default::default(),
        checkpoint: Default::default(),
    }
}

fn random_field(g: GridSpec, rng: &mut ChaCha8Rng) -> SpectralField {
    let coeffs = (0..g.num_modes()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    SpectralField::from_coeffs(g, coeffs).expect("length matches")
}

pub fn run(seed: u64) -> Result<Report> {
    let cfg = default_config(seed);
    let mut rep = Report::new("verify", seed, cfg.to_toml());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let g = GridSpec::new(8, 2)?;
    let f = random_field(g, &mut rng);
    let back = SpectralField::from_physical(g, &f.to_physical())?;
    let err = back.max_abs_diff(&f);
    rep.check("fft_roundtrip", err < 1e-12, err, "< 1e-12", g.num_modes());
    let phys = f.to_physical();
    let mass = phys.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / (phys.n * phys.n) as f64;
    let err = (mass - f.l2_norm_sq()).abs() / f.l2_norm_sq();
    rep.check("parseval", err < 1e-12, err, "relative < 1e-12", g.num_modes());

    let g64 = GridSpec::new(64, 1)?;
    let part = DyadicPartition::new(g64);
    let unity = g64
        .modes()
        .map(|k| (part.blocks().map(|j| chi(j, k.norm())).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    rep.check("partition_of_unity", unity < 1e-12, unity, "max_k |sum_j chi_j(k) - 1| < 1e-12", g64.num_modes());
    let part8 = DyadicPartition::new(g);
    let mut sum = SpectralField::zeros(g);
    for j in part8.blocks() {
        sum = sum.add(&part8.block(&f, j)?)?;
    }
    let err = sum.max_abs_diff(&f);
    rep.check("block_reconstruction", err < 1e-12, err, "< 1e-12", g.num_modes());
    let mut worst: f64 = 0.0;
    for alpha in [-0.5, 0.0, 0.5] {
        worst = worst.max((constant_norm(g, C64::new(1.0, 0.0), alpha)? - 2f64.powf(-alpha)).abs());
    }
    rep.check("constant_norm", worst < 1e-12, worst, "|(||1||_(C^alpha)) - 2^(-alpha)| < 1e-12", 3);

    // Scalar chaos orthogonality at low degree.
    let (samples, c) = (20_000usize, 1.0);
    let zs: Vec<C64> = (0..samples)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            C64::new(a, b) * (c / 2.0f64).sqrt()
        })
        .collect();
    let mut zmax: f64 = 0.0;
    for (k, l) in [(1, 0), (1, 1), (2, 1)] {
        for (kp, lp) in [(1, 0), (1, 1), (2, 1)] {
            let vals: Vec<f64> =
                zs.iter().map(|&z| (wick_point(z, c, k, l) * wick_point(z, c, kp, lp).conj()).re).collect();
            let exact = if (k, l) == (kp, lp) { factorial(k) * factorial(l) * c.powi((k + l) as i32) } else { 0.0 };
            zmax = zmax.max((mean(&vals) - exact).abs() / std_error(&vals));
        }
    }
    rep.check("chaos_orthogonality", zmax <= 4.0, zmax, "max |MC - exact| / SE <= 4", samples);

    let gz = GridSpec::new(3, 2)?;
    let z = OuState::sample_stationary(gz, 1.0, &NoiseStream::new(seed, 0), 0);
    let fam = WickFamily::from_field(&z.z, 0.4, &[(2, 1), (1, 1)])?;
    let direct = WickFamily::from_field(&z.z, 0.9, &[(2, 1), (1, 1)])?;
    let re = fam.reorder(0.9)?;
    let err = re.get(2, 1)?.max_abs_diff(&direct.get(2, 1)?).max(re.get(1, 1)?.max_abs_diff(&direct.get(1, 1)?));
    rep.check("wick_reorder", err < 1e-12, err, "< 1e-12", gz.num_modes());

    let g2 = GridSpec::new(2, 2)?;
    let c2 = stationary_constant(g2, 1.0);
    let n_mc = 4000usize;
    let powers: Vec<Vec<f64>> = (0..n_mc)
        .map(|i| -> Result<Vec<f64>> {
            let z = OuState::sample_stationary(g2, 1.0, &NoiseStream::new(seed, 1 + i as u64), 0);
            let w = WickFamily::from_field(&z.z, c2, &[(1, 1)])?.get(1, 1)?;
            Ok(w.coeffs().iter().map(|x| x.norm_sqr()).collect())
        })
        .collect::<Result<_>>()?;
    let oracle = exact_wick_oracle(1, 1, g2, 1.0, 0.0)?;
    let mut zmax: f64 = 0.0;
    for (i, o) in oracle.coeffs().iter().enumerate() {
        let col: Vec<f64> = powers.iter().map(|p| p[i]).collect();
        zmax = zmax.max((mean(&col) - o.re).abs() / std_error(&col));
    }
    rep.check("oracle_covariance", zmax <= 4.0, zmax, "max |MC - exact| / SE <= 4", n_mc);

    let (r1, r2) = super::wellposedness::energy_residual_ratio(cfg.model, 8, 1e-3)?;
    rep.check("energy_residual_ratio", (1.8..=2.2).contains(&(r1 / r2)), r1 / r2, "in [1.8, 2.2]", 2);

    let gs = cfg.grid()?;
    let sc = SolverConfig::new(cfg.model, gs, Drift::Renormalized, Forcing::Stochastic)?;
    let u0 = random_field(gs, &mut rng);
    let s = SolverState::new(sc, u0.clone(), NoiseStream::new(seed, 0))?;
    let mut cs = CoupledState::new(s.clone(), u0, 0.0)?;
    for _ in 0..20 {
        cs = cs.step(cfg.dt)?;
    }
    let same = cs.second_v() == cs.primary.v;
    rep.check("uncoupled_copies_identical", same, same as u8 as f64, "bitwise equal", 20);

    let mut full = s.clone();
    for _ in 0..20 {
        full = full.step(cfg.dt)?;
    }
    let mut half = s;
    for _ in 0..10 {
        half = half.step(cfg.dt)?;
    }
    let ck = Checkpoint { config: cfg.clone(), snapshot: Snapshot::Single(half) };
    let bytes = ck.to_bytes();
    let loaded = Checkpoint::from_bytes(&bytes)?;
    let stable = loaded.to_bytes() == bytes && loaded == ck;
    rep.check("checkpoint_roundtrip", stable, bytes.len() as f64, "save -> load -> save byte-identical", 1);
    let Snapshot::Single(mut resumed) = loaded.snapshot else { unreachable!() };
    for _ in 0..10 {
        resumed = resumed.step(cfg.dt)?;
    }
    let same = resumed.v == full.v && resumed.noise.z == full.noise.z && resumed.rng == full.rng;
    rep.check("resume_bitwise", same, same as u8 as f64, "10 + resume + 10 steps equals 20 steps bitwise", 20);
    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    let rejected = Checkpoint::from_bytes(&corrupt).is_err() && Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err();
    rep.check("checkpoint_rejects_corruption", rejected, rejected as u8 as f64, "bad magic and truncation are errors", 2);

    let serial = crate::ensemble::with_threads(Some(1), || super::coupling::run_pairs(&small_coupling(seed)));
    let parallel = crate::ensemble::with_threads(Some(3), || super::coupling::run_pairs(&small_coupling(seed)));
    let same = match (serial, parallel) {
        (Ok(a), Ok(b)) => a.iter().zip(&b).all(|(x, y)| x.log_diff == y.log_diff) && a.len() == b.len(),
        _ => false,
    };
    rep.check("thread_count_independent", same, same as u8 as f64, "1 and 3 workers give identical trajectories", 4);
    Ok(rep)
}

fn small_coupling(seed: u64) -> Config {
    let mut c = default_config(seed);
    c.experiment = Experiment::Coupling;
    c.lambda_grid = vec![5.0];
    c.horizon = 0.05;
    c.ensemble = 4;
    c.coupling.sample_every = 2;
    c
}
