use wcgl_core::besov::{besov_norm, chi, constant_norm, heat_smoothing_ratio, holder_norm, DyadicPartition};
use wcgl_core::spectral::{GridSpec, Mode, SpectralField};
use wcgl_core::C64;

#[test]
fn partition_of_unity() {
    let g = GridSpec::new(64, 1).unwrap();
    let part = DyadicPartition::new(g);
    let mut worst: f64 = 0.0;
    for k in g.modes() {
        let s: f64 = part.blocks().map(|j| part.weight(j, k)).sum();
        worst = worst.max((s - 1.0).abs());
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn blocks_have_dyadic_support() {
    for j in 0..6 {
        let lo = 0.75 * 2f64.powi(j);
        let hi = 8.0 / 3.0 * 2f64.powi(j);
        assert_eq!(chi(j, lo * 0.999), 0.0);
        assert_eq!(chi(j, hi * 1.001), 0.0);
        assert!(chi(j, 1.5 * 2f64.powi(j)) > 0.99);
    }
}

#[test]
fn blocks_reconstruct_the_field() {
    let g = GridSpec::new(20, 2).unwrap();
    let f = SpectralField::from_fn(g, |k| C64::new((k.0 as f64).sin(), (k.1 as f64 * 0.3).cos()) / (1.0 + k.norm()));
    let part = DyadicPartition::new(g);
    let mut acc = SpectralField::zeros(g);
    for j in part.blocks() {
        acc.axpy(C64::new(1.0, 0.0), &part.block(&f, j).unwrap()).unwrap();
    }
    assert!(acc.max_abs_diff(&f) < 1e-12);
}

#[test]
fn constant_has_holder_norm_two_to_minus_alpha() {
    let g = GridSpec::new(8, 2).unwrap();
    for &a in &[-0.5, 0.0, 0.5] {
        let n = constant_norm(g, C64::new(1.0, 0.0), a).unwrap();
        assert!((n - 2f64.powf(-a)).abs() < 1e-14, "{a}: {n}");
    }
}

#[test]
fn l2_besov_norm_of_one_block_plane_wave() {
    // A plane wave inside the plateau of block j has ||delta_j f||_{L^p} = |c| for every p.
    let g = GridSpec::new(16, 2).unwrap();
    let part = DyadicPartition::new(g);
    let mut f = SpectralField::zeros(g);
    f.set(Mode(6, 0), C64::new(0.0, 2.0));
    assert_eq!(part.weight(2, Mode(6, 0)), 1.0);
    for &p in &[1.0, 2.0, f64::INFINITY] {
        let n = besov_norm(&f, 0.5, p, 2.0, &part).unwrap();
        assert!((n - 2.0 * 2f64.powf(1.0)).abs() < 1e-12, "p = {p}: {n}");
    }
}

#[test]
fn heat_smoothing_ratio_is_bounded_for_a_rough_field() {
    let g = GridSpec::new(16, 2).unwrap();
    let part = DyadicPartition::new(g);
    let f = SpectralField::from_fn(g, |k| C64::from_polar(1.0, (k.0 * 7 + k.1 * 3) as f64));
    let mut max: f64 = 0.0;
    for i in 0..20 {
        let t = 10f64.powf(-4.0 + 4.0 * i as f64 / 19.0);
        max = max.max(heat_smoothing_ratio(&f, -0.1, 0.5, t, 1.0, &part).unwrap());
    }
    assert!(max.is_finite() && max > 0.0 && max < 10.0, "{max}");
    assert!(heat_smoothing_ratio(&f, -0.1, 0.5, 0.0, 1.0, &part).is_err());
    assert!(holder_norm(&f, -0.1, &part).unwrap() > 0.0);
}
