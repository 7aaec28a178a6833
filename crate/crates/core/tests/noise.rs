use wcgl_core::noise::{transition_variance, NoiseStream, OuState};
use wcgl_core::spectral::{rho, GridSpec, Mode};

fn z_score(samples: &[f64], expect: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean - expect) / (var / n).sqrt()
}

#[test]
fn stationary_sample_has_the_invariant_variance() {
    let g = GridSpec::new(3, 1).unwrap();
    let mu = 0.9;
    let rng = NoiseStream::new(2024, 0);
    let samples: Vec<OuState> = (0..4000).map(|i| OuState::sample_stationary(g, mu, &rng, i)).collect();
    for &k in &[Mode(0, 0), Mode(1, -1), Mode(3, 2)] {
        let sq: Vec<f64> = samples.iter().map(|s| s.z.get(k).norm_sqr()).collect();
        let z = z_score(&sq, 0.5 / rho(k, mu));
        assert!(z.abs() < 4.0, "{k:?}: z = {z}");
        // Real and imaginary parts carry half the variance each.
        let re: Vec<f64> = samples.iter().map(|s| s.z.get(k).re.powi(2)).collect();
        assert!(z_score(&re, 0.25 / rho(k, mu)).abs() < 4.0);
    }
}

#[test]
fn zero_start_chain_matches_transition_variance() {
    let g = GridSpec::new(2, 1).unwrap();
    let mu = 1.0;
    let (dt, steps) = (0.01, 5);
    let mut finals = Vec::new();
    for traj in 0..3000 {
        let mut rng = NoiseStream::new(9, traj);
        let mut z = OuState::zero_start(g, mu, 0.0);
        for _ in 0..steps {
            z = z.evolve(dt, &mut rng).unwrap();
        }
        finals.push(z);
    }
    let t = dt * steps as f64;
    for &k in &[Mode(0, 0), Mode(1, 1), Mode(-2, 0)] {
        let sq: Vec<f64> = finals.iter().map(|s| s.z.get(k).norm_sqr()).collect();
        let expect = transition_variance(k, mu, t);
        assert!((finals[0].variance(k) - expect).abs() < 1e-15);
        assert!(z_score(&sq, expect).abs() < 4.0);
    }
}

#[test]
fn stationarity_is_preserved_by_the_exact_transition() {
    let g = GridSpec::new(2, 1).unwrap();
    let mu = 0.5;
    let k = Mode(1, 0);
    let mut sq = Vec::new();
    let mut lag = Vec::new();
    for traj in 0..4000 {
        let mut rng = NoiseStream::new(3, traj);
        let z0 = OuState::sample_stationary(g, mu, &rng, 0);
        let z1 = z0.evolve(0.02, &mut rng).unwrap();
        sq.push(z1.z.get(k).norm_sqr());
        lag.push((z0.z.get(k) * z1.z.get(k).conj()).re);
    }
    let var = 0.5 / rho(k, mu);
    assert!(z_score(&sq, var).abs() < 4.0);
    let m = wcgl_core::spectral::semigroup_multiplier(k, 0.02, mu).unwrap();
    assert!(z_score(&lag, (m.conj() * var).re).abs() < 4.0);
}
