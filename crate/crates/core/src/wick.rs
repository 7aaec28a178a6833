//! Wick powers `Z^{:i,j:}` of the OU field and their exact second moments.

use crate::error::{Error, Result};
use crate::noise::{Origin, OuState};
use crate::spectral::{rho, theta, GridSpec, Mode, PhysicalField, SpectralField};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Complex Hermite polynomial `:z^k zbar^l:_c`, the Wick power of a
/// `CN(0, c)` variable.
pub fn wick_point(z: C64, c: f64, k: usize, l: usize) -> C64 {
    WickPoly::new(c, k, l).eval(z)
}

/// `:z^k zbar^l:_c` with its coefficients precomputed.
#[derive(Clone, Debug)]
pub struct WickPoly {
    k: usize,
    l: usize,
    coefs: Vec<f64>,
}

impl WickPoly {
    pub fn new(c: f64, k: usize, l: usize) -> Self {
        let coefs = (0..=k.min(l))
            .map(|r| factorial(r) * binomial(k, r) * binomial(l, r) * (-c).powi(r as i32))
            .collect();
        WickPoly { k, l, coefs }
    }

    pub fn eval(&self, z: C64) -> C64 {
        // Horner in |z|^2 on the common factor z^{k-r} zbar^{l-r}.
        let r_max = self.coefs.len() - 1;
        let a = z.norm_sqr();
        let mut acc = 0.0;
        for r in 0..=r_max {
            acc = acc * a + self.coefs[r];
        }
        let base = z.powu((self.k - r_max) as u32) * z.conj().powu((self.l - r_max) as u32);
        base * acc
    }
}

/// Renormalization constant `c = E|Z_t(x)|^2 = sum_k sigma_k^2` at the state's time.
pub fn wick_constant(state: &OuState) -> f64 {
    state.variance_profile().iter().sum()
}

/// `sum_k 1/(2 rho_k)` over the cutoff.
pub fn stationary_constant(grid: GridSpec, mu: f64) -> f64 {
    grid.modes().map(|k| 0.5 / rho(k, mu)).sum()
}

/// The pairs `(i, j)` with `i <= m + 1`, `j <= m` that enter the drift.
pub fn drift_orders(m: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..=m + 1 {
        for j in 0..=m {
            v.push((i, j));
        }
    }
    v
}

/// Truncated Wick powers `P_N :Z^i Zbar^j:_c` for a set of orders. Only pairs
/// with `i >= j` are stored; the rest follow from `Z^{:j,i:} = conj Z^{:i,j:}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WickFamily {
    pub c: f64,
    pub z: SpectralField,
    powers: BTreeMap<(usize, usize), SpectralField>,
    z_grid: Option<PhysicalField>,
}

fn canonical(i: usize, j: usize) -> ((usize, usize), bool) {
    if i >= j {
        ((i, j), false)
    } else {
        ((j, i), true)
    }
}

impl WickFamily {
    /// Wick powers of `z` with constant `c`, evaluated pointwise on the padded
    /// grid and truncated once.
    pub fn from_field(z: &SpectralField, c: f64, orders: &[(usize, usize)]) -> Result<Self> {
        let grid = z.grid();
        let degree = orders.iter().map(|&(i, j)| i + j).max().unwrap_or(0);
        grid.check_degree(degree)?;
        let zp = z.to_physical();
        let mut powers = BTreeMap::new();
        for &(i, j) in orders {
            let (key, _) = canonical(i, j);
            if key.0 + key.1 <= 1 || powers.contains_key(&key) {
                continue;
            }
            let poly = WickPoly::new(c, key.0, key.1);
            let w = zp.map(|x| poly.eval(x));
            powers.insert(key, SpectralField::from_physical(grid, &w)?);
        }
        Ok(WickFamily { c, z: z.clone(), powers, z_grid: Some(zp) })
    }

    pub fn grid(&self) -> GridSpec {
        self.z.grid()
    }

    /// `Z^{:i,j:}`; `(0,0)` is the constant one and `(1,0)` is `Z` itself.
    pub fn get(&self, i: usize, j: usize) -> Result<SpectralField> {
        match (i, j) {
            (0, 0) => Ok(SpectralField::constant(self.grid(), C64::new(1.0, 0.0))),
            (1, 0) => Ok(self.z.clone()),
            (0, 1) => Ok(self.z.conj()),
            _ => {
                let (key, flip) = canonical(i, j);
                let f = self.powers.get(&key).ok_or(Error::MissingWickPower(i, j))?;
                Ok(if flip { f.conj() } else { f.clone() })
            }
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (key, _) = canonical(i, j);
        key.0 + key.1 <= 1 || self.powers.contains_key(&key)
    }

    /// Physical values of the truncated powers for the given orders.
    pub fn physical(&self, orders: &[(usize, usize)]) -> Result<WickGrid> {
        let n = self.grid().n();
        let mut stored: BTreeMap<(usize, usize), PhysicalField> = BTreeMap::new();
        for &(i, j) in orders {
            let (key, _) = canonical(i, j);
            if stored.contains_key(&key) {
                continue;
            }
            let f = match key {
                (0, 0) => PhysicalField { n, data: vec![C64::new(1.0, 0.0); n * n] },
                (1, 0) => match &self.z_grid {
                    Some(g) => g.clone(),
                    None => self.z.to_physical(),
                },
                _ => self.powers.get(&key).ok_or(Error::MissingWickPower(i, j))?.to_physical(),
            };
            stored.insert(key, f);
        }
        Ok(WickGrid { stored })
    }

    /// Re-expresses the family with respect to another constant, using
    /// `:x^k xbar^l:_{c1} = sum_r (-1)^r r! C(k,r) C(l,r) (c1 - c2)^r :x^{k-r} xbar^{l-r}:_{c2}`.
    /// The identity is linear, so it acts on the truncated fields directly.
    pub fn reorder(&self, new_c: f64) -> Result<Self> {
        // With c1 = new_c and c2 = self.c: (-1)^r (c1 - c2)^r = (self.c - new_c)^r.
        let d = self.c - new_c;
        let mut powers = BTreeMap::new();
        for (&(k, l), _) in &self.powers {
            let mut acc = SpectralField::zeros(self.grid());
            for r in 0..=l {
                let coef = d.powi(r as i32) * factorial(r) * binomial(k, r) * binomial(l, r);
                acc.axpy(C64::new(coef, 0.0), &self.get(k - r, l - r)?)?;
            }
            powers.insert((k, l), acc);
        }
        Ok(WickFamily { c: new_c, z: self.z.clone(), powers, z_grid: self.z_grid.clone() })
    }
}

/// Physical values of a family's powers, with conjugates derived on demand.
pub struct WickGrid {
    stored: BTreeMap<(usize, usize), PhysicalField>,
}

impl WickGrid {
    /// Grid values of the stored power and whether `(i, j)` is its conjugate.
    pub fn slice(&self, i: usize, j: usize) -> (&[C64], bool) {
        let (key, flip) = canonical(i, j);
        (&self.stored[&key].data, flip)
    }

    pub fn value(&self, i: usize, j: usize, idx: usize) -> C64 {
        let (key, flip) = canonical(i, j);
        let v = self.stored[&key].data[idx];
        if flip {
            v.conj()
        } else {
            v
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.stored.contains_key(&canonical(i, j).0)
    }
}

/// The family entering the drift at the state's time, ordered with the
/// time-dependent constant `c(t) = E|Z_t(x)|^2`.
pub fn wick_family(state: &OuState, m: usize) -> Result<WickFamily> {
    WickFamily::from_field(&state.z, wick_constant(state), &drift_orders(m))
}

/// Powers of the restarted process `Z_{s,t} = Z_t - e^{(t-s)A} Z_s`, assembled
/// from a stationary pair by the binomial expansion
/// `Z_{s,t}^{:i,j:} = sum_{a,b} C(i,a) C(j,b) (-V)^{i-a} (-Vbar)^{j-b} Z_t^{:a,b:}`
/// with `V = e^{(t-s)A} Z_s`, all ordered with the stationary constant.
pub fn shift_wick_family(
    z_s: &OuState,
    z_t: &OuState,
    orders: &[(usize, usize)],
) -> Result<WickFamily> {
    if z_s.origin != Origin::Stationary || z_t.origin != Origin::Stationary {
        return Err(Error::InvalidParameter("shift needs stationary endpoints".into()));
    }
    let delta = z_t.t - z_s.t;
    let grid = z_t.z.grid();
    let c = stationary_constant(grid, z_t.mu);
    let degree = orders.iter().map(|&(i, j)| i + j).max().unwrap_or(0);
    grid.check_degree(degree)?;
    let v = z_s.z.apply_semigroup(delta, z_t.mu)?;
    let vp = v.to_physical();
    let zp = z_t.z.to_physical();
    let mut powers = BTreeMap::new();
    for &(i, j) in orders {
        let (key, _) = canonical(i, j);
        if key.0 + key.1 <= 1 || powers.contains_key(&key) {
            continue;
        }
        let (i, j) = key;
        let data = zp
            .data
            .iter()
            .zip(&vp.data)
            .map(|(&x, &y)| {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..=i {
                    for b in 0..=j {
                        let coef = binomial(i, a) * binomial(j, b);
                        acc += coef
                            * (-y).powu((i - a) as u32)
                            * (-y.conj()).powu((j - b) as u32)
                            * wick_point(x, c, a, b);
                    }
                }
                acc
            })
            .collect();
        powers.insert(key, SpectralField::from_physical(grid, &PhysicalField { n: zp.n, data })?);
    }
    let z = z_t.z.sub(&v)?;
    Ok(WickFamily { c, z, powers, z_grid: None })
}

/// Exact lagged covariance `E[W_t(omega) conj W_{t+h}(omega)]` of the Fourier
/// coefficients of `W = P_N :Z^k Zbar^l:` under the stationary law, for every
/// `omega` in the cutoff. By Gaussian pairing it equals
/// `k! l! sum_{p_1+..+p_k+q_1+..+q_l = omega} prod a(p_i) prod b(q_j)` with
/// `a(p) = e^{-(rho_p - i theta_p) h} / (2 rho_p)` and `b = conj a`.
/// Restricted to `k + l <= 4` and `N <= 4`.
pub fn exact_wick_oracle(
    k: usize,
    l: usize,
    grid: GridSpec,
    mu: f64,
    lag: f64,
) -> Result<SpectralField> {
    let degree = k + l;
    if degree == 0 || degree > 4 || grid.cutoff() > 4 {
        return Err(Error::OracleTooLarge { degree, cutoff: grid.cutoff() });
    }
    if lag < 0.0 {
        return Err(Error::NegativeTime(lag));
    }
    let n = grid.cutoff() as i64;
    let weight = |p: Mode, conj: bool| {
        let e = (-C64::new(rho(p, mu), if conj { theta(p) } else { -theta(p) }) * lag).exp();
        e * (0.5 / rho(p, mu))
    };
    // Dense array over the box |p|_inf <= r, grown by one factor at a time.
    let mut r = 0i64;
    let mut acc: Vec<C64> = vec![C64::new(1.0, 0.0)];
    for f in 0..degree {
        let conj = f >= k;
        let r2 = r + n;
        let s_old = (2 * r + 1) as usize;
        let s_new = (2 * r2 + 1) as usize;
        let mut next = vec![C64::new(0.0, 0.0); s_new * s_new];
        for a1 in -r..=r {
            for a2 in -r..=r {
                let va = acc[((a1 + r) as usize) * s_old + (a2 + r) as usize];
                if va == C64::new(0.0, 0.0) {
                    continue;
                }
                for p1 in -n..=n {
                    for p2 in -n..=n {
                        let w = weight(Mode(p1, p2), conj);
                        let idx = ((a1 + p1 + r2) as usize) * s_new + (a2 + p2 + r2) as usize;
                        next[idx] += va * w;
                    }
                }
            }
        }
        acc = next;
        r = r2;
    }
    let norm = factorial(k) * factorial(l);
    let s = (2 * r + 1) as usize;
    Ok(SpectralField::from_fn(grid, |w| {
        acc[((w.0 + r) as usize) * s + (w.1 + r) as usize] * norm
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseStream;

    #[test]
    fn point_formula_matches_recursion() {
        // :z^k zbar^l: = zbar :z^k zbar^{l-1}: - c k :z^{k-1} zbar^{l-1}:
        let z = C64::new(0.7, -1.3);
        let c = 0.9;
        for k in 0..5 {
            for l in 1..5 {
                let lhs = wick_point(z, c, k, l);
                let mut rhs = z.conj() * wick_point(z, c, k, l - 1);
                if k > 0 {
                    rhs -= c * k as f64 * wick_point(z, c, k - 1, l - 1);
                }
                assert!((lhs - rhs).norm() < 1e-12, "{k} {l}");
            }
        }
        assert_eq!(wick_point(z, c, 3, 0), z.powu(3));
    }

    #[test]
    fn conjugation_symmetry() {
        let z = C64::new(-0.4, 0.25);
        for k in 0..4 {
            for l in 0..4 {
                assert!((wick_point(z, 1.3, l, k) - wick_point(z, 1.3, k, l).conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn reorder_identity_pointwise() {
        let z = C64::new(1.1, 0.3);
        let (c1, c2): (f64, f64) = (0.8, 0.35);
        for k in 0..4 {
            for l in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..=k.min(l) {
                    let coef = (-(c1 - c2)).powi(r as i32) * factorial(r) * binomial(k, r) * binomial(l, r);
                    acc += coef * wick_point(z, c2, k - r, l - r);
                }
                assert!((acc - wick_point(z, c1, k, l)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn family_requires_padding() {
        let g = GridSpec::new(3, 1).unwrap();
        let z = OuState::zero_start(g, 1.0, 0.0);
        assert!(matches!(wick_family(&z, 1), Err(Error::InsufficientPadding { .. })));
    }

    #[test]
    fn family_conjugate_access() {
        let g = GridSpec::new(3, 2).unwrap();
        let rng = NoiseStream::new(4, 0);
        let z = OuState::sample_stationary(g, 1.0, &rng, 0);
        let fam = wick_family(&z, 1).unwrap();
        assert!(matches!(fam.get(1, 3), Err(Error::MissingWickPower(1, 3))));
        assert!(fam.get(1, 2).unwrap().max_abs_diff(&fam.get(2, 1).unwrap().conj()) == 0.0);
        let b = fam.get(1, 1).unwrap();
        assert!(b.max_abs_diff(&b.conj()) < 1e-13);
        assert!(fam.get(0, 1).unwrap().max_abs_diff(&fam.z.conj()) == 0.0);
    }

    #[test]
    fn oracle_at_zero_lag_is_real_and_degree_one_is_variance() {
        let g = GridSpec::new(2, 2).unwrap();
        let o = exact_wick_oracle(1, 0, g, 1.3, 0.0).unwrap();
        for k in g.modes() {
            assert!((o.get(k) - C64::new(0.5 / rho(k, 1.3), 0.0)).norm() < 1e-15);
        }
        let o = exact_wick_oracle(2, 1, g, 1.0, 0.0).unwrap();
        assert!(o.coeffs().iter().all(|c| c.im.abs() < 1e-15 && c.re > 0.0));
        assert!(exact_wick_oracle(3, 2, g, 1.0, 0.0).is_err());
        assert!(exact_wick_oracle(1, 1, GridSpec::new(5, 2).unwrap(), 1.0, 0.0).is_err());
    }
}
