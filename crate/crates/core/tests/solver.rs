use std::collections::HashMap;
use wcgl_core::noise::{coarsen_increments, NoiseStream, OuState};
use wcgl_core::params::ModelParams;
use wcgl_core::solver::{
    energy_report, gradient_terms, picard_horizon, picard_local, step_coupled, CoupledState, Drift, Forcing,
    SolverConfig, SolverState,
};
use wcgl_core::spectral::{rho, theta, GridSpec, Mode, SpectralField};
use wcgl_core::{Error, C64};

fn smooth_field(g: GridSpec, amp: f64, phase: f64) -> SpectralField {
    SpectralField::from_fn(g, |k| {
        C64::from_polar(amp * (-(k.norm_sq()) / 2.0).exp(), phase + 0.7 * k.0 as f64 - 0.3 * k.1 as f64)
    })
}

/// Full-lattice product of the given factors, truncated to the cutoff only at the end.
fn brute_product(factors: &[SpectralField]) -> HashMap<Mode, C64> {
    let mut acc: HashMap<Mode, C64> = HashMap::from([(Mode(0, 0), C64::new(1.0, 0.0))]);
    for f in factors {
        let mut next: HashMap<Mode, C64> = HashMap::new();
        for (&a, &va) in &acc {
            for k in f.grid().modes() {
                *next.entry(Mode(a.0 + k.0, a.1 + k.1)).or_default() += va * f.get(k);
            }
        }
        acc = next;
    }
    acc
}

#[test]
fn drift_matches_brute_force_convolution() {
    let g = GridSpec::new(2, 2).unwrap();
    let nu = C64::new(1.3, -0.4);
    let tau = C64::new(0.2, 0.5);
    let p = ModelParams::new(0.9, nu, tau, 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let mut s = SolverState::new(cfg, smooth_field(g, 0.8, 0.1), NoiseStream::new(3, 0)).unwrap();
    for _ in 0..3 {
        s = s.step(0.01).unwrap();
    }
    let psi = s.drift().unwrap();
    let (v, vb) = (s.v.clone(), s.v.conj());
    let w = |i, j| s.wick.get(i, j).unwrap();
    // m = 1: sum_{i<=2, j<=1} C(2,i) C(1,j) v^i vbar^j Z^{:2-i,1-j:}
    let terms: Vec<(f64, Vec<SpectralField>)> = vec![
        (1.0, vec![w(2, 1)]),
        (1.0, vec![vb.clone(), w(2, 0)]),
        (2.0, vec![v.clone(), w(1, 1)]),
        (2.0, vec![v.clone(), vb.clone(), w(1, 0)]),
        (1.0, vec![v.clone(), v.clone(), w(0, 1)]),
        (1.0, vec![v.clone(), v.clone(), vb.clone()]),
    ];
    let prods: Vec<(f64, HashMap<Mode, C64>)> = terms.into_iter().map(|(c, f)| (c, brute_product(&f))).collect();
    let u = s.u();
    for k in g.modes() {
        let mut expect = (tau + 1.0) * u.get(k);
        for (c, pr) in &prods {
            expect += -nu * *c * pr.get(&k).copied().unwrap_or_default();
        }
        assert!((expect - psi.get(k)).norm() < 1e-12, "{k:?}");
    }
}

#[test]
fn linear_deterministic_run_converges_at_first_order_to_the_exact_flow() {
    let g = GridSpec::new(3, 1).unwrap();
    let tau = C64::new(0.5, 1.0);
    let p = ModelParams::new(0.6, C64::new(0.0, 0.0), tau, 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Deterministic).unwrap();
    let u0 = smooth_field(g, 1.0, 0.0);
    let t_end = 0.5;
    let exact = u0.map_modes(|k, c| c * ((tau + 1.0 - C64::new(rho(k, 0.6), theta(k))) * t_end).exp());
    let err = |dt: f64| {
        let s = SolverState::new(cfg, u0.clone(), NoiseStream::new(0, 0)).unwrap().run_until(t_end, dt).unwrap();
        s.v.sub(&exact).unwrap().l2_norm_sq().sqrt()
    };
    let (e1, e2, e3) = (err(0.01), err(0.005), err(0.0025));
    assert!((e1 / e2 - 2.0).abs() < 0.1 && (e2 / e3 - 2.0).abs() < 0.1, "{e1} {e2} {e3}");
}

#[test]
fn naive_and_renormalized_agree_in_the_linear_regime() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(0.0, 0.0), C64::new(-1.0, 0.0), 1).unwrap();
    let a = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let b = SolverConfig::new(p, g, Drift::Naive, Forcing::Stochastic).unwrap();
    let u0 = smooth_field(g, 1.0, 0.3);
    let sa = SolverState::new(a, u0.clone(), NoiseStream::new(5, 0)).unwrap().run_until(0.1, 0.01).unwrap();
    let sb = SolverState::new(b, u0, NoiseStream::new(5, 0)).unwrap().run_until(0.1, 0.01).unwrap();
    assert_eq!(sa.u(), sb.u());
}

#[test]
fn strong_error_halves_with_the_step_on_a_fixed_noise_path() {
    // Successive differences |v_{2h} - v_h| on a shared fine noise path; a
    // first-order scheme halves them at every refinement.
    let g = GridSpec::new(6, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.3), C64::new(0.5, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let t_end = 0.25;
    let fine_steps = 1024;
    let h = t_end / fine_steps as f64;
    let strides = [16usize, 8, 4, 2, 1];
    let mut diffs = vec![0.0; strides.len() - 1];
    for path in 0..8 {
        let mut rng = NoiseStream::new(99, path);
        let z0 = OuState::zero_start(g, p.mu, 0.0);
        let fine: Vec<SpectralField> = (0..fine_steps).map(|_| z0.increment_from_draws(h, &rng.next_draws(g))).collect();
        let run = |stride: usize| {
            let mut s = SolverState::new(cfg, smooth_field(g, 1.0, 0.2), NoiseStream::new(0, 0)).unwrap();
            for chunk in fine.chunks(stride) {
                let eta = coarsen_increments(chunk, h, p.mu).unwrap();
                s = s.step_with_increment(h * stride as f64, &eta).unwrap();
            }
            s.v
        };
        let runs: Vec<SpectralField> = strides.iter().map(|&s| run(s)).collect();
        for (d, w) in diffs.iter_mut().zip(runs.windows(2)) {
            *d += w[0].sub(&w[1]).unwrap().l2_norm_sq();
        }
    }
    let orders: Vec<f64> = diffs.windows(2).map(|w| (w[0] / w[1]).sqrt().log2()).collect();
    let mean = orders.iter().sum::<f64>() / orders.len() as f64;
    assert!((0.8..1.3).contains(&mean), "{orders:?}");
}

#[test]
fn energy_identity_residual_is_first_order() {
    let g = GridSpec::new(8, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.5), C64::new(0.3, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Deterministic).unwrap();
    let s = SolverState::new(cfg, smooth_field(g, 1.0, 0.0), NoiseStream::new(0, 0)).unwrap().run_until(0.05, 0.001).unwrap();
    let r1 = energy_report(&s, 1.0, 1e-3).unwrap().residual();
    let r2 = energy_report(&s, 1.0, 5e-4).unwrap().residual();
    assert!((r1 / r2 - 2.0).abs() < 0.2, "{r1} {r2}");
    assert!(energy_report(&s, 9.0, 1e-3).is_err());
}

#[test]
fn gradient_form_dominates_the_dissipation() {
    let g = GridSpec::new(6, 2).unwrap();
    for &mu in &[0.5, 2.0] {
        let p = ModelParams::new(mu, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
        for &pe in &[1.0, 1.5, 2.0] {
            if pe > p.max_energy_exponent() {
                continue;
            }
            let frac = p.dissipation_fraction(pe);
            for seed in 0..5 {
                let rng = NoiseStream::new(seed, 0);
                let v = OuState::sample_stationary(g, 0.1, &rng, 0).z;
                let (form, diss) = gradient_terms(&v, mu, pe).unwrap();
                assert!(form - frac * diss >= -1e-10 * (1.0 + diss), "mu {mu} p {pe}: {form} < {frac} * {diss}");
            }
        }
    }
}

#[test]
fn coupled_copies_coincide_bitwise_without_coupling() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let u0 = smooth_field(g, 1.0, 0.0);
    let s = SolverState::new(cfg, u0.clone(), NoiseStream::new(1, 0)).unwrap();
    let mut c = CoupledState::new(s, u0, 0.0).unwrap();
    for _ in 0..50 {
        c = step_coupled(&c, 0.005).unwrap();
    }
    assert_eq!(c.second_v(), c.primary.v);
    assert_eq!(c.log_diff_norm_sq(), f64::NEG_INFINITY);
}

#[test]
fn uncoupled_difference_tracks_an_independent_second_run() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.4), C64::new(0.2, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let (u0, u1) = (smooth_field(g, 1.0, 0.0), smooth_field(g, 0.5, 1.0));
    let s = SolverState::new(cfg, u0, NoiseStream::new(8, 0)).unwrap();
    let mut c = CoupledState::new(s, u1.clone(), 0.0).unwrap();
    let mut other = SolverState::new(cfg, u1, NoiseStream::new(8, 0)).unwrap();
    for _ in 0..40 {
        c = c.step(0.005).unwrap();
        other = other.step(0.005).unwrap();
    }
    let diff = c.second_v().sub(&other.v).unwrap().l2_norm_sq().sqrt();
    assert!(diff < 1e-11 * (1.0 + other.v.l2_norm_sq().sqrt()), "{diff}");
}

#[test]
fn strong_coupling_contracts_the_difference() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let s = SolverState::new(cfg, SpectralField::zeros(g), NoiseStream::new(2, 0)).unwrap();
    let mut c = CoupledState::new(s, smooth_field(g, 2.0, 0.0), 20.0).unwrap();
    let start = c.log_diff_norm_sq();
    for _ in 0..200 {
        c = c.step(0.005).unwrap();
    }
    // Rate at least 2(1 + lambda) minus the drift's Lipschitz contribution.
    assert!(c.log_diff_norm_sq() < start - 20.0, "{start} -> {}", c.log_diff_norm_sq());
    assert!(c.log_diff_norm_sq().is_finite());
}

#[test]
fn converged_fixed_point_is_the_euler_trajectory() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.2), C64::new(0.0, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let s = SolverState::new(cfg, smooth_field(g, 1.0, 0.0), NoiseStream::new(4, 0)).unwrap();
    let res = picard_local(&s, 0.05, 10, 1e-13, 100).unwrap();
    let mut e = s.clone();
    for n in 1..=10 {
        e = e.step(0.005).unwrap();
        assert!(res.trajectory[n].max_abs_diff(&e.v) < 1e-12);
    }
    assert!(res.changes.windows(2).all(|w| w[1] <= w[0] * 1.0001 || w[1] < 1e-12));
}

#[test]
fn fixed_point_horizon_shrinks_with_the_size_of_the_data() {
    let g = GridSpec::new(4, 2).unwrap();
    let p = ModelParams::new(1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
    let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Stochastic).unwrap();
    let mut prev = f64::INFINITY;
    for &r in &[1.0, 3.0, 9.0, 27.0] {
        let s = SolverState::new(cfg, SpectralField::constant(g, C64::new(r, 0.0)), NoiseStream::new(6, 0)).unwrap();
        let h = picard_horizon(&s, 1e-3, 2.0, 1e-10, 60);
        assert!(h <= prev, "R = {r}: {h} > {prev}");
        prev = h;
    }
    assert!(prev < 2.0);
    let s = SolverState::new(cfg, SpectralField::constant(g, C64::new(1e3, 0.0)), NoiseStream::new(6, 0)).unwrap();
    assert!(matches!(picard_local(&s, 1.0, 4, 1e-10, 30), Err(Error::HorizonTooLarge { .. })));
}
