use wcgl_core::noise::{NoiseStream, OuState};
use wcgl_core::spectral::{GridSpec, Mode};
use wcgl_core::wick::{
    drift_orders, exact_wick_oracle, factorial, shift_wick_family, stationary_constant, wick_constant, wick_family,
    wick_point, WickFamily,
};
use wcgl_core::C64;

#[test]
fn wick_constant_of_stationary_state_is_the_stationary_sum() {
    let g = GridSpec::new(5, 2).unwrap();
    let rng = NoiseStream::new(0, 0);
    let z = OuState::sample_stationary(g, 1.2, &rng, 0);
    assert!((wick_constant(&z) - stationary_constant(g, 1.2)).abs() < 1e-14);
    let z0 = OuState::zero_start(g, 1.2, 0.0);
    assert_eq!(wick_constant(&z0), 0.0);
}

#[test]
fn family_is_the_pointwise_polynomial() {
    // Truncation of a pointwise polynomial of a band-limited field, checked
    // against the brute-force convolution of Z and conj Z.
    let g = GridSpec::new(3, 2).unwrap();
    let rng = NoiseStream::new(5, 1);
    let z = OuState::sample_stationary(g, 1.0, &rng, 0);
    let c = 0.37;
    let fam = WickFamily::from_field(&z.z, c, &drift_orders(1)).unwrap();
    let zc = z.z.conj();
    let w11 = fam.get(1, 1).unwrap();
    let w21 = fam.get(2, 1).unwrap();
    for w in g.modes() {
        let mut s11 = C64::new(0.0, 0.0);
        let mut s21 = C64::new(0.0, 0.0);
        for a in g.modes() {
            let b = Mode(w.0 - a.0, w.1 - a.1);
            s11 += z.z.get(a) * zc.get(b);
            for p in g.modes() {
                s21 += z.z.get(a) * z.z.get(p) * zc.get(Mode(w.0 - a.0 - p.0, w.1 - a.1 - p.1));
            }
        }
        // :|z|^2: = |z|^2 - c,  :z^2 zbar: = z^2 zbar - 2 c z.
        if w == Mode(0, 0) {
            s11 -= c;
        }
        s21 -= 2.0 * c * z.z.get(w);
        assert!((s11 - w11.get(w)).norm() < 1e-12);
        assert!((s21 - w21.get(w)).norm() < 1e-12);
    }
}

#[test]
fn shift_family_matches_restarted_chain() {
    // Z_{s,t} assembled from a stationary pair equals the zero-start chain
    // driven by the same increments, Wick-ordered with the stationary
    // constant; re-ordering that family with c(t) gives the solver's family.
    let g = GridSpec::new(4, 2).unwrap();
    let mu = 0.8;
    let mut rng = NoiseStream::new(17, 2);
    let zs = OuState::sample_stationary(g, mu, &rng, 0);
    let mut zt = zs.clone();
    let mut restart = OuState::zero_start(g, mu, 0.0);
    for _ in 0..7 {
        let draws = rng.next_draws(g);
        let eta = zt.increment_from_draws(0.013, &draws);
        zt = zt.evolve_with_increment(0.013, &eta).unwrap();
        restart = restart.evolve_with_increment(0.013, &eta).unwrap();
    }
    let orders = drift_orders(1);
    let shifted = shift_wick_family(&zs, &zt, &orders).unwrap();
    let c_stat = stationary_constant(g, mu);
    let direct_stat = WickFamily::from_field(&restart.z, c_stat, &orders).unwrap();
    let direct_time = wick_family(&restart, 1).unwrap();
    assert!(direct_time.c < c_stat);
    let reordered = direct_time.reorder(c_stat).unwrap();
    for &(i, j) in &orders {
        let a = shifted.get(i, j).unwrap();
        assert!(a.max_abs_diff(&direct_stat.get(i, j).unwrap()) < 1e-12, "({i},{j})");
        assert!(a.max_abs_diff(&reordered.get(i, j).unwrap()) < 1e-12, "({i},{j}) reordered");
    }
}

#[test]
fn scalar_chaos_moments_match_exactly_computable_values() {
    // E :z^k zbar^l: conj(:z^k' zbar^l':) = delta k! l! c^{k+l}, verified by
    // Gauss-Hermite-free quadrature: polar integration on a fine grid.
    let c: f64 = 0.8;
    let nr = 20000;
    let nth = 64;
    let rmax = 12.0 * c.sqrt();
    let moment = |k: usize, l: usize, kp: usize, lp: usize| {
        let mut acc = C64::new(0.0, 0.0);
        for ir in 0..nr {
            let r = (ir as f64 + 0.5) * rmax / nr as f64;
            let dens = (-r * r / c).exp() / (std::f64::consts::PI * c);
            for it in 0..nth {
                let th = 2.0 * std::f64::consts::PI * it as f64 / nth as f64;
                let z = C64::from_polar(r, th);
                acc += wick_point(z, c, k, l) * wick_point(z, c, kp, lp).conj() * dens * r;
            }
        }
        acc * (rmax / nr as f64) * (2.0 * std::f64::consts::PI / nth as f64)
    };
    for &(k, l, kp, lp) in &[(1, 1, 1, 1), (2, 1, 2, 1), (2, 1, 1, 0), (2, 0, 1, 1), (0, 0, 1, 1), (3, 1, 3, 1)] {
        let m = moment(k, l, kp, lp);
        let expect = if (k, l) == (kp, lp) { factorial(k) * factorial(l) * c.powi((k + l) as i32) } else { 0.0 };
        assert!((m - C64::new(expect, 0.0)).norm() < 1e-7, "{k}{l}{kp}{lp}: {m}");
    }
}

#[test]
fn oracle_matches_monte_carlo_on_a_small_grid() {
    let g = GridSpec::new(2, 2).unwrap();
    let mu = 1.0;
    let oracle = exact_wick_oracle(1, 1, g, mu, 0.0).unwrap();
    let rng = NoiseStream::new(77, 0);
    let n = 6000;
    let mut acc = vec![0.0; g.num_modes()];
    let mut acc2 = vec![0.0; g.num_modes()];
    let c = stationary_constant(g, mu);
    for i in 0..n {
        let z = OuState::sample_stationary(g, mu, &rng, i);
        let fam = WickFamily::from_field(&z.z, c, &[(1, 1)]).unwrap();
        for (idx, w) in fam.get(1, 1).unwrap().coeffs().iter().enumerate() {
            acc[idx] += w.norm_sqr();
            acc2[idx] += w.norm_sqr().powi(2);
        }
    }
    for (idx, k) in g.modes().enumerate() {
        let mean = acc[idx] / n as f64;
        let se = ((acc2[idx] / n as f64 - mean * mean) / n as f64).sqrt();
        let z = (mean - oracle.get(k).re) / se;
        assert!(z.abs() < 4.5, "{k:?}: {mean} vs {} (z = {z})", oracle.get(k).re);
    }
}

#[test]
fn lagged_oracle_decays_with_the_lag() {
    let g = GridSpec::new(2, 2).unwrap();
    let a = exact_wick_oracle(2, 1, g, 1.0, 0.0).unwrap();
    let b = exact_wick_oracle(2, 1, g, 1.0, 0.05).unwrap();
    for k in g.modes() {
        assert!(b.get(k).norm() < a.get(k).norm());
    }
}
