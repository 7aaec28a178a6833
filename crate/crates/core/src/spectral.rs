//! Truncated Fourier fields on the torus and their padded physical grids.
//!
//! Convention: `f(x) = sum_k f_k e^{2 pi i k.x}` with `f_k = int f e^{-2 pi i k.x} dx`,
//! so the physical mean is the zero mode and Parseval reads
//! `mean |f|^2 = sum_k |f_k|^2`.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A lattice point `k = (k1, k2)` of the dual torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(pub i64, pub i64);

impl Mode {
    pub fn norm_sq(self) -> f64 {
        (self.0 * self.0 + self.1 * self.1) as f64
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn linf(self) -> i64 {
        self.0.abs().max(self.1.abs())
    }

    pub fn neg(self) -> Mode {
        Mode(-self.0, -self.1)
    }
}

/// Real part of the symbol of `1 - (i + mu) Lap`.
pub fn rho(k: Mode, mu: f64) -> f64 {
    1.0 + 4.0 * PI * PI * mu * k.norm_sq()
}

/// Imaginary part of the symbol of `1 - (i + mu) Lap`.
pub fn theta(k: Mode) -> f64 {
    4.0 * PI * PI * k.norm_sq()
}

/// Fourier multiplier of `e^{tA}` with `A = (i + mu) Lap - 1`.
pub fn semigroup_multiplier(k: Mode, t: f64, mu: f64) -> Result<C64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(multiplier_unchecked(k, t, mu))
}

fn multiplier_unchecked(k: Mode, t: f64, mu: f64) -> C64 {
    (-C64::new(rho(k, mu), theta(k)) * t).exp()
}

/// `(e^z - 1) / z`, accurate near zero.
pub fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-5 {
        C64::new(1.0, 0.0) + z * 0.5 + z * z / 6.0
    } else {
        (z.exp() - 1.0) / z
    }
}

type CacheKey = (&'static str, usize, [u64; 3]);

/// Memoizes per-mode tables that depend on a few scalars (step size, `mu`).
/// The cache is small and cleared wholesale when it fills up.
pub fn cached<T: Send + Sync + 'static>(key: CacheKey, build: impl FnOnce() -> Vec<T>) -> Arc<Vec<T>> {
    use std::any::Any;
    type Store = HashMap<CacheKey, Arc<dyn Any + Send + Sync>>;
    static CACHE: OnceLock<Mutex<Store>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        if let Ok(v) = hit.clone().downcast::<Vec<T>>() {
            return v;
        }
    }
    let v = Arc::new(build());
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if map.len() >= 256 {
        map.clear();
    }
    map.insert(key, v.clone());
    v
}

/// Smallest padding factor that evaluates a degree-`d` product without aliasing.
pub fn required_pad(degree: usize) -> usize {
    (degree + 2) / 2
}

/// Cutoff `N` and padding factor of a discretisation. The physical grid has
/// `n = pad (2N + 1)` points per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    cutoff: usize,
    pad: usize,
    #[serde(default)]
    accept_aliasing: bool,
}

impl GridSpec {
    pub fn new(cutoff: usize, pad: usize) -> Result<Self> {
        if pad < 1 {
            return Err(Error::InvalidParameter("pad must be at least 1".into()));
        }
        if cutoff > 4096 {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} is unreasonably large")));
        }
        Ok(GridSpec { cutoff, pad, accept_aliasing: false })
    }

    /// Grid whose padding is exact for the degree `2m + 1` nonlinearity.
    pub fn for_degree(cutoff: usize, m: usize) -> Result<Self> {
        Self::new(cutoff, m + 1)
    }

    /// Allow products whose degree exceeds what `pad` resolves, as long as
    /// `pad >= 2`. Aliasing errors are then accepted knowingly.
    pub fn accepting_aliasing(mut self) -> Self {
        self.accept_aliasing = true;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn accepts_aliasing(&self) -> bool {
        self.accept_aliasing
    }

    /// Number of modes per axis, `2N + 1`.
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn num_modes(&self) -> usize {
        self.side() * self.side()
    }

    /// Physical points per axis.
    pub fn n(&self) -> usize {
        self.pad * self.side()
    }

    pub fn index(&self, k: Mode) -> Option<usize> {
        let n = self.cutoff as i64;
        if k.linf() > n {
            return None;
        }
        Some(((k.0 + n) as usize) * self.side() + (k.1 + n) as usize)
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let n = self.cutoff as i64;
        let s = self.side();
        Mode((idx / s) as i64 - n, (idx % s) as i64 - n)
    }

    /// Modes in storage order: `k1` outer, `k2` inner, both ascending.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.num_modes()).map(move |i| self.mode(i))
    }

    /// Same padding, different cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        GridSpec { cutoff, ..*self }
    }

    pub fn with_pad(&self, pad: usize) -> Result<Self> {
        let g = GridSpec::new(self.cutoff, pad)?;
        Ok(GridSpec { accept_aliasing: self.accept_aliasing, ..g })
    }

    /// Checks that a pointwise product of `degree` fields is representable.
    pub fn check_degree(&self, degree: usize) -> Result<()> {
        let required = required_pad(degree);
        if self.pad >= required {
            return Ok(());
        }
        if self.accept_aliasing && self.pad >= 2 {
            log::warn!(
                "degree {degree} product on pad {} grid aliases (exact needs pad {required})",
                self.pad
            );
            return Ok(());
        }
        Err(Error::InsufficientPadding { degree, required, pad: self.pad })
    }
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) })
        })
        .clone()
}

fn run(fft: &Arc<dyn Fft<f64>>, buf: &mut [C64]) {
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
}

#[inline]
fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Values on the uniform `n x n` grid; `data[i2 * n + i1]` sits at `(i1/n, i2/n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub n: usize,
    pub data: Vec<C64>,
}

impl PhysicalField {
    pub fn zeros(n: usize) -> Self {
        PhysicalField { n, data: vec![ZERO; n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                data.push(f(i1 as f64 / n as f64, i2 as f64 / n as f64));
            }
        }
        PhysicalField { n, data }
    }

    pub fn mean(&self) -> C64 {
        self.data.iter().sum::<C64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// `L^p` norm with respect to the normalized grid measure; `p = inf` is the max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.data.iter().map(|z| z.norm().powf(p)).sum();
        (s / self.data.len() as f64).powf(1.0 / p)
    }

    pub fn conj(&self) -> Self {
        PhysicalField { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(self.n, other.n);
        PhysicalField {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        PhysicalField { n: self.n, data: self.data.iter().map(|&z| f(z)).collect() }
    }
}

/// Fourier coefficients on `|k|_inf <= N`, stored in [`GridSpec::modes`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField { grid, coeffs: vec![ZERO; grid.num_modes()] }
    }

    pub fn constant(grid: GridSpec, c: C64) -> Self {
        let mut f = Self::zeros(grid);
        f.set(Mode(0, 0), c);
        f
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.num_modes() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                grid.num_modes()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Mode) -> C64) -> Self {
        SpectralField { grid, coeffs: grid.modes().map(f).collect() }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Coefficient at `k`, zero outside the cutoff.
    pub fn get(&self, k: Mode) -> C64 {
        self.grid.index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Panics if `k` lies outside the cutoff.
    pub fn set(&mut self, k: Mode, c: C64) {
        let i = self.grid.index(k).expect("mode outside cutoff");
        self.coeffs[i] = c;
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid.cutoff != other.grid.cutoff {
            return Err(Error::GridMismatch(format!(
                "cutoff {} vs {}",
                self.grid.cutoff, other.grid.cutoff
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: C64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map_modes(|_, c| a * c)
    }

    fn zip(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map_modes(&self, f: impl Fn(Mode, C64) -> C64) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| f(self.grid.mode(i), c)).collect(),
        }
    }

    /// Coefficients of the pointwise complex conjugate: `k -> conj(f_{-k})`.
    pub fn conj(&self) -> Self {
        let n = self.coeffs.len();
        // Storage order is symmetric: index of -k is (len - 1 - index of k).
        SpectralField {
            grid: self.grid,
            coeffs: (0..n).map(|i| self.coeffs[n - 1 - i].conj()).collect(),
        }
    }

    /// `e^{tA} f`.
    pub fn apply_semigroup(&self, t: f64, mu: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let g = self.grid;
        let table = cached(("semigroup", g.cutoff, [t, mu, 0.0].map(f64::to_bits)), || {
            g.modes().map(|k| multiplier_unchecked(k, t, mu)).collect()
        });
        let coeffs = self.coeffs.iter().zip(table.iter()).map(|(&c, &e)| e * c).collect();
        Ok(SpectralField { grid: g, coeffs })
    }

    /// `||f||_{L^2}^2 = sum_k |f_k|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `||grad f||_{L^2}^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| 4.0 * PI * PI * self.grid.mode(i).norm_sq() * c.norm_sqr())
            .sum()
    }

    /// Partial derivative along axis 0 or 1.
    pub fn derivative(&self, axis: usize) -> Self {
        self.map_modes(|k, c| {
            let kj = if axis == 0 { k.0 } else { k.1 } as f64;
            C64::new(0.0, 2.0 * PI * kj) * c
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).fold(0.0, |a, (x, y)| a.max((x - y).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Restriction to a smaller cutoff or zero extension to a larger one,
    /// keeping this field's padding factor.
    pub fn resize(&self, cutoff: usize) -> Self {
        let g = self.grid.with_cutoff(cutoff);
        SpectralField::from_fn(g, |k| self.get(k))
    }

    /// Same coefficients interpreted on a grid with another padding factor.
    pub fn regrid(&self, grid: GridSpec) -> Result<Self> {
        if grid.cutoff != self.grid.cutoff {
            return Err(Error::GridMismatch("regrid cannot change the cutoff".into()));
        }
        Ok(SpectralField { grid, coeffs: self.coeffs.clone() })
    }

    /// Exact synthesis on the padded grid.
    pub fn to_physical(&self) -> PhysicalField {
        let g = self.grid;
        let n = g.n();
        let side = g.side();
        let nc = g.cutoff as i64;
        let p = plans(n);
        // Stage 1: one transform along x2 per retained k1.
        let mut rows = vec![ZERO; side * n];
        for r in 0..side {
            for c in 0..side {
                rows[r * n + wrap(c as i64 - nc, n)] = self.coeffs[r * side + c];
            }
        }
        run(&p.inv, &mut rows);
        // Stage 2: transpose into grid layout and transform along x1.
        let mut out = vec![ZERO; n * n];
        for r in 0..side {
            let col = wrap(r as i64 - nc, n);
            for i2 in 0..n {
                out[i2 * n + col] = rows[r * n + i2];
            }
        }
        run(&p.inv, &mut out);
        PhysicalField { n, data: out }
    }

    /// Fourier coefficients of grid values, truncated to the cutoff of `grid`.
    pub fn from_physical(grid: GridSpec, f: &PhysicalField) -> Result<Self> {
        let n = grid.n();
        if f.n != n {
            return Err(Error::GridMismatch(format!("physical side {} vs {}", f.n, n)));
        }
        let side = grid.side();
        let nc = grid.cutoff as i64;
        let p = plans(n);
        let mut buf = f.data.clone();
        run(&p.fwd, &mut buf);
        let mut rows = vec![ZERO; side * n];
        for r in 0..side {
            let col = wrap(r as i64 - nc, n);
            for i2 in 0..n {
                rows[r * n + i2] = buf[i2 * n + col];
            }
        }
        run(&p.fwd, &mut rows);
        let norm = 1.0 / (n * n) as f64;
        let mut coeffs = vec![ZERO; side * side];
        for r in 0..side {
            for c in 0..side {
                coeffs[r * side + c] = rows[r * n + wrap(c as i64 - nc, n)] * norm;
            }
        }
        Ok(SpectralField { grid, coeffs })
    }
}

/// Truncated product `P_N(f_1 ... f_d)`, conjugating the factors flagged in `conj`.
pub fn dealiased_product(factors: &[&SpectralField], conj: &[bool]) -> Result<SpectralField> {
    if factors.is_empty() {
        return Err(Error::InvalidParameter("empty product".into()));
    }
    if conj.len() != factors.len() {
        return Err(Error::InvalidParameter("conjugation flags do not match factors".into()));
    }
    let grid = factors[0].grid;
    for f in factors {
        if f.grid.cutoff != grid.cutoff || f.grid.pad != grid.pad {
            return Err(Error::GridMismatch("factors live on different grids".into()));
        }
    }
    grid.check_degree(factors.len())?;
    let mut acc: Option<PhysicalField> = None;
    for (f, &c) in factors.iter().zip(conj) {
        let mut phys = f.to_physical();
        if c {
            phys = phys.conj();
        }
        acc = Some(match acc {
            None => phys,
            Some(a) => a.zip_map(&phys, |x, y| x * y),
        });
    }
    SpectralField::from_physical(grid, &acc.expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: GridSpec, seed: u64) -> SpectralField {
        // Small deterministic pseudo-random coefficients.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let coeffs = (0..grid.num_modes()).map(|_| C64::new(next(), next())).collect();
        SpectralField::from_coeffs(grid, coeffs).unwrap()
    }

    #[test]
    fn storage_order_roundtrip() {
        let g = GridSpec::new(3, 2).unwrap();
        for (i, k) in g.modes().enumerate() {
            assert_eq!(g.index(k), Some(i));
        }
        assert_eq!(g.index(Mode(4, 0)), None);
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        let g = GridSpec::new(2, 2).unwrap();
        let f = field(g, 3);
        let phys = f.to_physical();
        let n = g.n();
        for i2 in 0..n {
            for i1 in 0..n {
                let (x1, x2) = (i1 as f64 / n as f64, i2 as f64 / n as f64);
                let direct: C64 = g
                    .modes()
                    .map(|k| {
                        f.get(k) * C64::from_polar(1.0, 2.0 * PI * (k.0 as f64 * x1 + k.1 as f64 * x2))
                    })
                    .sum();
                assert!((direct - phys.data[i2 * n + i1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn product_matches_convolution() {
        let g = GridSpec::new(3, 2).unwrap();
        let (a, b) = (field(g, 1), field(g, 2));
        let prod = dealiased_product(&[&a, &b], &[false, true]).unwrap();
        let bc = b.conj();
        for k in g.modes() {
            let mut s = ZERO;
            for j in g.modes() {
                s += a.get(j) * bc.get(Mode(k.0 - j.0, k.1 - j.1));
            }
            assert!((s - prod.get(k)).norm() < 1e-12, "{k:?}");
        }
    }

    #[test]
    fn insufficient_padding_is_rejected() {
        let g = GridSpec::new(4, 1).unwrap();
        let f = field(g, 5);
        assert!(matches!(
            dealiased_product(&[&f, &f, &f], &[false; 3]),
            Err(Error::InsufficientPadding { degree: 3, required: 2, pad: 1 })
        ));
        let g2 = GridSpec::new(4, 2).unwrap();
        let f2 = field(g2, 5);
        assert!(dealiased_product(&[&f2, &f2, &f2, &f2], &[false; 4]).is_err());
        let g3 = g2.accepting_aliasing();
        let f3 = f2.regrid(g3).unwrap();
        assert!(dealiased_product(&[&f3, &f3, &f3, &f3], &[false; 4]).is_ok());
    }

    #[test]
    fn semigroup_rejects_negative_time() {
        assert!(semigroup_multiplier(Mode(1, 0), -1.0, 1.0).is_err());
        let m = semigroup_multiplier(Mode(1, 2), 0.3, 0.7).unwrap();
        let expect = (-0.3 * rho(Mode(1, 2), 0.7)).exp();
        assert!((m.norm() - expect).abs() < 1e-15);
    }

    #[test]
    fn phi1_is_continuous_at_threshold() {
        let z = C64::new(-1e-5, 3e-6);
        let series = C64::new(1.0, 0.0) + z * 0.5 + z * z / 6.0;
        assert!(((z.exp() - 1.0) / z - series).norm() < 1e-10);
    }
}
