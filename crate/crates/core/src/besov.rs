//! Littlewood-Paley blocks and Besov norms of truncated fields.

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, Mode, SpectralField};
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

/// 64-point Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| {
        let n = 64usize;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

fn bump_integral(a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(&xi, &wi)| wi * bump(mid + half * xi)).sum::<f64>() * half
}

/// Smooth step from 0 at `r <= -1` to 1 at `r >= 1`.
pub fn smooth_step(r: f64) -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    if r <= -1.0 {
        return 0.0;
    }
    if r >= 1.0 {
        return 1.0;
    }
    let total = *TOTAL.get_or_init(|| 2.0 * bump_integral(-1.0, 0.0));
    // Only the left half is integrated; the right half follows by symmetry.
    if r <= 0.0 {
        bump_integral(-1.0, r) / total
    } else {
        1.0 - bump_integral(-1.0, -r) / total
    }
}

/// Low-frequency cutoff: 1 on `|x| <= 3/4`, 0 on `|x| >= 4/3`.
pub fn chi_low(x: f64) -> f64 {
    let x = x.abs();
    if x <= INNER {
        1.0
    } else if x >= OUTER {
        0.0
    } else {
        1.0 - smooth_step(2.0 * (x - INNER) / (OUTER - INNER) - 1.0)
    }
}

/// Multiplier of block `j >= -1` at frequency magnitude `x`.
pub fn chi(j: i32, x: f64) -> f64 {
    match j {
        -1 => chi_low(x),
        _ => {
            let y = x / 2f64.powi(j);
            chi_low(y / 2.0) - chi_low(y)
        }
    }
}

/// The dyadic partition restricted to a cutoff: multipliers per block and mode.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: GridSpec,
    j_max: i32,
    weights: Vec<Vec<f64>>,
}

impl DyadicPartition {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.cutoff().max(1) as f64;
        let j_max = (std::f64::consts::SQRT_2 * n).log2().ceil() as i32 + 1;
        let weights = (-1..=j_max)
            .map(|j| grid.modes().map(|k| chi(j, k.norm())).collect())
            .collect();
        DyadicPartition { grid, j_max, weights }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    pub fn weight(&self, j: i32, k: Mode) -> f64 {
        self.grid.index(k).map_or(0.0, |i| self.weights[(j + 1) as usize][i])
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if f.grid().cutoff() != self.grid.cutoff() {
            return Err(Error::GridMismatch(format!(
                "partition built for cutoff {}, field has {}",
                self.grid.cutoff(),
                f.grid().cutoff()
            )));
        }
        Ok(())
    }

    /// `delta_j f`.
    pub fn block(&self, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check(f)?;
        if j < -1 || j > self.j_max {
            return Err(Error::InvalidParameter(format!("block {j} outside -1..={}", self.j_max)));
        }
        let w = &self.weights[(j + 1) as usize];
        let mut out = f.clone();
        for (c, &wi) in out.coeffs_mut().iter_mut().zip(w) {
            *c *= wi;
        }
        Ok(out)
    }

    fn block_is_empty(&self, j: i32) -> bool {
        self.weights[(j + 1) as usize].iter().all(|&w| w == 0.0)
    }

    /// `||delta_j f||_{L^p}` for every block, in order.
    pub fn block_norms(&self, f: &SpectralField, p: f64) -> Result<Vec<f64>> {
        validate_exponent(p, "p")?;
        self.blocks()
            .map(|j| {
                if self.block_is_empty(j) {
                    return Ok(0.0);
                }
                Ok(self.block(f, j)?.to_physical().lp_norm(p))
            })
            .collect()
    }
}

fn validate_exponent(p: f64, name: &str) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in [1, inf], got {p}")))
    }
}

/// `(sum_j (2^{alpha j} ||delta_j f||_{L^p})^q)^{1/q}`, with the usual sup for `q = inf`.
pub fn besov_norm(f: &SpectralField, alpha: f64, p: f64, q: f64, part: &DyadicPartition) -> Result<f64> {
    validate_exponent(q, "q")?;
    let norms = part.block_norms(f, p)?;
    let terms = part.blocks().zip(norms).map(|(j, b)| 2f64.powf(alpha * j as f64) * b);
    Ok(if q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    })
}

/// `||f||_{C^alpha} = ||f||_{B^alpha_{inf,inf}}`.
pub fn holder_norm(f: &SpectralField, alpha: f64, part: &DyadicPartition) -> Result<f64> {
    besov_norm(f, alpha, f64::INFINITY, f64::INFINITY, part)
}

/// `||e^{tA} f||_{C^{alpha+beta}} / (t^{-beta/2} ||f||_{C^alpha})`.
pub fn heat_smoothing_ratio(
    f: &SpectralField,
    alpha: f64,
    beta: f64,
    t: f64,
    mu: f64,
    part: &DyadicPartition,
) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let base = holder_norm(f, alpha, part)?;
    if base == 0.0 {
        return Err(Error::InvalidParameter("zero field has no smoothing ratio".into()));
    }
    let smoothed = holder_norm(&f.apply_semigroup(t, mu)?, alpha + beta, part)?;
    Ok(smoothed * t.powf(beta / 2.0) / base)
}

/// Convenience: `||c||_{C^alpha}` of a constant field.
pub fn constant_norm(grid: GridSpec, c: C64, alpha: f64) -> Result<f64> {
    let f = SpectralField::constant(grid, c);
    holder_norm(&f, alpha, &DyadicPartition::new(grid))
}
