//! Complex space-time white noise through its Ornstein-Uhlenbeck convolution.
//!
//! Each Fourier mode of `Z` solves `dZ_k = -(rho_k + i theta_k) Z_k dt + dW_k`
//! with independent standard complex Brownian motions, so the transition over
//! a step `delta` is sampled exactly.

use crate::error::{Error, Result};
use crate::spectral::{cached, rho, GridSpec, Mode, SpectralField};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

const TAG_INCREMENT: u64 = 0x494e_4352_454d_4e54;
const TAG_INITIAL: u64 = 0x494e_4954_4941_4c5f;

/// Positions of the modes of a cutoff in concentric-square order: `(0,0)`,
/// then `|k|_inf = 1`, `2`, ... Every cutoff is a prefix of the next, so the
/// same seed produces the same draw for a mode at any cutoff.
fn shell_order(cutoff: usize) -> Arc<Vec<Mode>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<Mode>>>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(cutoff)
        .or_insert_with(|| {
            let mut out = vec![Mode(0, 0)];
            for s in 1..=cutoff as i64 {
                for k1 in -s..=s {
                    for k2 in -s..=s {
                        if k1.abs().max(k2.abs()) == s {
                            out.push(Mode(k1, k2));
                        }
                    }
                }
            }
            Arc::new(out)
        })
        .clone()
}

/// Counter-based source of standard complex normals. The draw for step `j`
/// and mode `k` depends only on `(seed, trajectory, j, k)`, so trajectories
/// can be run in any order or on any thread and resumed from the counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub trajectory: u64,
    pub step: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        NoiseStream { seed, trajectory, step: 0 }
    }

    fn rng(&self, tag: u64, stream: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trajectory.to_le_bytes());
        key[16..24].copy_from_slice(&tag.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        rng
    }

    fn fill(grid: GridSpec, mut rng: ChaCha8Rng) -> SpectralField {
        let mut f = SpectralField::zeros(grid);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        for &k in shell_order(grid.cutoff()).iter() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            f.set(k, C64::new(re, im) * scale);
        }
        f
    }

    /// i.i.d. `CN(0, 1)` coefficients for the current step; advances the counter.
    pub fn next_draws(&mut self, grid: GridSpec) -> SpectralField {
        let f = Self::fill(grid, self.rng(TAG_INCREMENT, self.step));
        self.step += 1;
        f
    }

    /// `CN(0, 1)` coefficients for an initial condition, indexed by `label`.
    /// Independent of every increment draw; does not advance the counter.
    pub fn initial_draws(&self, grid: GridSpec, label: u64) -> SpectralField {
        Self::fill(grid, self.rng(TAG_INITIAL, label))
    }
}

/// How the OU process was started.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    /// Sampled from the invariant law.
    Stationary,
    /// `Z_s = 0`.
    ZeroStart { s: f64 },
}

/// `Z_t` together with the bookkeeping needed for its exact variance profile.
#[derive(Clone, Debug, PartialEq)]
pub struct OuState {
    pub t: f64,
    pub z: SpectralField,
    pub origin: Origin,
    pub mu: f64,
}

/// Variance of the exact transition over `delta`, `(1 - e^{-2 rho delta}) / (2 rho)`.
pub fn transition_variance(k: Mode, mu: f64, delta: f64) -> f64 {
    let r = rho(k, mu);
    -(-2.0 * r * delta).exp_m1() / (2.0 * r)
}

impl OuState {
    pub fn zero_start(grid: GridSpec, mu: f64, s: f64) -> Self {
        OuState { t: s, z: SpectralField::zeros(grid), origin: Origin::ZeroStart { s }, mu }
    }

    /// A draw from the invariant law, `Z_k ~ CN(0, 1/(2 rho_k))`, at time 0.
    pub fn sample_stationary(grid: GridSpec, mu: f64, rng: &NoiseStream, label: u64) -> Self {
        let g = rng.initial_draws(grid, label);
        let z = g.map_modes(|k, c| c * (0.5 / rho(k, mu)).sqrt());
        OuState { t: 0.0, z, origin: Origin::Stationary, mu }
    }

    /// `E|Z_t(k)|^2`.
    pub fn variance(&self, k: Mode) -> f64 {
        match self.origin {
            Origin::Stationary => 0.5 / rho(k, self.mu),
            Origin::ZeroStart { s } => transition_variance(k, self.mu, self.t - s),
        }
    }

    pub fn variance_profile(&self) -> Vec<f64> {
        self.z.grid().modes().map(|k| self.variance(k)).collect()
    }

    /// Noise increment `eta` for a step of length `delta` from standard draws.
    pub fn increment_from_draws(&self, delta: f64, draws: &SpectralField) -> SpectralField {
        let mu = self.mu;
        let grid = draws.grid();
        let sd = cached(("transition_sd", grid.cutoff(), [mu, delta, 0.0].map(f64::to_bits)), || {
            grid.modes().map(|k| transition_variance(k, mu, delta).sqrt()).collect()
        });
        let coeffs = draws.coeffs().iter().zip(sd.iter()).map(|(&g, &s)| g * s).collect();
        SpectralField::from_coeffs(grid, coeffs).expect("same grid")
    }

    /// Exact transition `Z_{t+delta} = e^{delta A} Z_t + eta`.
    pub fn evolve_with_increment(&self, delta: f64, eta: &SpectralField) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::NegativeTime(delta));
        }
        let mut z = self.z.apply_semigroup(delta, self.mu)?;
        z.axpy(C64::new(1.0, 0.0), eta)?;
        Ok(OuState { t: self.t + delta, z, origin: self.origin, mu: self.mu })
    }

    pub fn evolve(&self, delta: f64, rng: &mut NoiseStream) -> Result<Self> {
        let draws = rng.next_draws(self.z.grid());
        let eta = self.increment_from_draws(delta, &draws);
        self.evolve_with_increment(delta, &eta)
    }
}

/// Combines the increments of consecutive fine steps into the increment of the
/// coarse step they span: `eta = sum_i e^{(n-1-i) h A} eta_i`.
pub fn coarsen_increments(fine: &[SpectralField], h: f64, mu: f64) -> Result<SpectralField> {
    let first = fine.first().ok_or_else(|| Error::InvalidParameter("no increments".into()))?;
    let mut acc = SpectralField::zeros(first.grid());
    for eta in fine {
        acc = acc.apply_semigroup(h, mu)?;
        acc.axpy(C64::new(1.0, 0.0), eta)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_order_is_prefix_closed() {
        let a = shell_order(3);
        let b = shell_order(5);
        assert_eq!(&b[..a.len()], &a[..]);
        assert_eq!(a.len(), 49);
    }

    #[test]
    fn draws_are_paired_across_cutoffs() {
        let mut s1 = NoiseStream::new(7, 3);
        let mut s2 = s1;
        let small = s1.next_draws(GridSpec::new(4, 2).unwrap());
        let large = s2.next_draws(GridSpec::new(9, 2).unwrap());
        for k in small.grid().modes() {
            assert_eq!(small.get(k), large.get(k));
        }
    }

    #[test]
    fn draws_are_independent_of_order() {
        let g = GridSpec::new(2, 2).unwrap();
        let mut a = NoiseStream::new(1, 0);
        let _ = a.next_draws(g);
        let second = a.next_draws(g);
        let mut b = NoiseStream { step: 1, ..NoiseStream::new(1, 0) };
        assert_eq!(b.next_draws(g), second);
        let mut c = NoiseStream::new(1, 1);
        c.step = 1;
        assert_ne!(c.next_draws(g), second);
    }

    #[test]
    fn zero_start_variance_grows_to_stationary() {
        let g = GridSpec::new(2, 2).unwrap();
        let mut z = OuState::zero_start(g, 1.0, 0.0);
        let k = Mode(1, 1);
        assert_eq!(z.variance(k), 0.0);
        z.t = 100.0;
        assert!((z.variance(k) - 0.5 / rho(k, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn coarsened_increment_reproduces_two_steps() {
        let g = GridSpec::new(2, 2).unwrap();
        let mu = 0.8;
        let mut rng = NoiseStream::new(11, 0);
        let z0 = OuState::sample_stationary(g, mu, &rng, 0);
        let e1 = z0.increment_from_draws(0.1, &rng.next_draws(g));
        let e2 = z0.increment_from_draws(0.1, &rng.next_draws(g));
        let two = z0.evolve_with_increment(0.1, &e1).unwrap().evolve_with_increment(0.1, &e2).unwrap();
        let eta = coarsen_increments(&[e1, e2], 0.1, mu).unwrap();
        let one = z0.evolve_with_increment(0.2, &eta).unwrap();
        assert!(one.z.max_abs_diff(&two.z) < 1e-14);
    }
}
