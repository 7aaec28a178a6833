//! Da Prato-Debussche splitting `u = v + Z` and the exponential Euler scheme
//! for the remainder
//!
//! ```text
//! dv/dt = A v + Psi(v),   Psi(v) = -nu sum_{i<=m+1, j<=m} C(m+1,i) C(m,j) v^i vbar^j Z^{:m+1-i,m-j:} + (tau+1)(v+Z).
//! ```

use crate::error::{Error, Result};
use crate::noise::{NoiseStream, OuState};
use crate::params::ModelParams;
use crate::spectral::{cached, phi1, rho, theta, GridSpec, PhysicalField, SpectralField};
use std::sync::Arc;
use crate::wick::{binomial, drift_orders, wick_constant, WickFamily, WickGrid};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// `||v||_{L^2}` above which a trajectory is declared blown up.
pub const BLOWUP_L2: f64 = 1e8;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Drift {
    /// Wick-ordered nonlinearity.
    Renormalized,
    /// `-nu |u|^{2m} u` applied to `u = v + Z` without counterterms.
    Naive,
    /// Only the linear part `(tau + 1)(v + Z)`.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Forcing {
    Stochastic,
    /// No noise: `Z = 0` and `c = 0`.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub drift: Drift,
    pub forcing: Forcing,
}

impl SolverConfig {
    pub fn new(params: ModelParams, grid: GridSpec, drift: Drift, forcing: Forcing) -> Result<Self> {
        params.validate()?;
        if drift == Drift::Renormalized && !params.is_linear() {
            grid.check_degree(2 * params.m + 1)?;
        }
        if drift == Drift::Naive {
            grid.check_degree(2 * params.m + 1)?;
        }
        Ok(SolverConfig { params, grid, drift, forcing })
    }

    fn effective_drift(&self) -> Drift {
        if self.params.is_linear() {
            Drift::Linear
        } else {
            self.drift
        }
    }

    fn orders(&self) -> Vec<(usize, usize)> {
        match self.effective_drift() {
            Drift::Renormalized => drift_orders(self.params.m),
            _ => vec![(1, 0)],
        }
    }

    fn family(&self, noise: &OuState) -> Result<WickFamily> {
        let c = match self.forcing {
            Forcing::Stochastic => wick_constant(noise),
            Forcing::Deterministic => 0.0,
        };
        WickFamily::from_field(&noise.z, c, &self.orders())
    }

    /// Per-mode `(e^{-(rho+i theta+shift) delta}, delta phi1(-(rho+i theta+shift) delta))`.
    fn propagators(&self, delta: f64, shift: f64) -> Arc<Vec<(C64, C64)>> {
        let mu = self.params.mu;
        let grid = self.grid;
        cached(("prop", grid.cutoff(), [mu, delta, shift].map(f64::to_bits)), || {
            grid.modes()
                .map(|k| {
                    let z = -C64::new(rho(k, mu) + shift, theta(k)) * delta;
                    (z.exp(), phi1(z) * delta)
                })
                .collect()
        })
    }
}

/// Pointwise drift coefficients `-nu C(m+1,i) C(m,j)` indexed by `(i, j)`.
fn drift_coefficients(p: &ModelParams) -> Vec<((usize, usize), C64)> {
    let m = p.m;
    drift_orders(m)
        .into_iter()
        .map(|(i, j)| ((i, j), -p.nu * binomial(m + 1, i) * binomial(m, j)))
        .collect()
}

/// Fills `buf` with `1, x, x^2, ...`.
#[inline]
fn fill_powers(buf: &mut [C64], x: C64) {
    for e in 1..buf.len() {
        buf[e] = buf[e - 1] * x;
    }
}

/// Drift terms with their Wick factors resolved to grid slices.
struct Terms<'a> {
    z: (&'a [C64], bool),
    wick: Vec<(usize, usize, C64, &'a [C64], bool)>,
}

impl<'a> Terms<'a> {
    fn new(p: &ModelParams, wg: &'a WickGrid, renormalized: bool) -> Self {
        let m = p.m;
        let wick = if renormalized {
            drift_coefficients(p)
                .into_iter()
                .map(|((i, j), c)| {
                    let (sl, flip) = wg.slice(m + 1 - i, m - j);
                    (i, j, c, sl, flip)
                })
                .collect()
        } else {
            Vec::new()
        };
        Terms { z: wg.slice(1, 0), wick }
    }

    #[inline]
    fn z(&self, idx: usize) -> C64 {
        self.z.0[idx]
    }

    #[inline]
    fn w(sl: &[C64], flip: bool, idx: usize) -> C64 {
        if flip {
            sl[idx].conj()
        } else {
            sl[idx]
        }
    }
}

/// Drift evaluated on the padded grid, before truncation.
fn drift_grid(cfg: &SolverConfig, v: &PhysicalField, wg: &WickGrid) -> PhysicalField {
    let p = cfg.params;
    let m = p.m;
    let lin = p.tau + 1.0;
    let drift = cfg.effective_drift();
    let terms = Terms::new(&p, wg, drift == Drift::Renormalized);
    let mut data = Vec::with_capacity(v.data.len());
    let mut vp = vec![ONE; m + 2];
    let mut vbp = vec![ONE; m + 1];
    for (idx, &vx) in v.data.iter().enumerate() {
        let u = vx + terms.z(idx);
        data.push(match drift {
            Drift::Linear => lin * u,
            Drift::Naive => -p.nu * u.norm_sqr().powi(m as i32) * u + lin * u,
            Drift::Renormalized => {
                fill_powers(&mut vp, vx);
                fill_powers(&mut vbp, vx.conj());
                let mut acc = lin * u;
                for &(i, j, c, sl, flip) in &terms.wick {
                    acc += c * vp[i] * vbp[j] * Terms::w(sl, flip, idx);
                }
                acc
            }
        });
    }
    PhysicalField { n: v.n, data }
}

/// One trajectory of the remainder together with its driving noise.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub cfg: SolverConfig,
    pub t: f64,
    pub v: SpectralField,
    pub noise: OuState,
    pub wick: WickFamily,
    pub rng: NoiseStream,
}

impl SolverState {
    /// Starts at `t = 0` with `v_0 = u_0` and `Z_0 = 0`.
    pub fn new(cfg: SolverConfig, u0: SpectralField, rng: NoiseStream) -> Result<Self> {
        if u0.grid().cutoff() != cfg.grid.cutoff() {
            return Err(Error::GridMismatch("initial datum has the wrong cutoff".into()));
        }
        let u0 = u0.regrid(cfg.grid)?;
        let noise = OuState::zero_start(cfg.grid, cfg.params.mu, 0.0);
        let wick = cfg.family(&noise)?;
        Ok(SolverState { cfg, t: 0.0, v: u0, noise, wick, rng })
    }

    /// Rebuilds a state from stored `t`, `v`, `Z` and noise counter.
    pub fn restore(cfg: SolverConfig, t: f64, v: SpectralField, noise: OuState, rng: NoiseStream) -> Result<Self> {
        let wick = cfg.family(&noise)?;
        Ok(SolverState { cfg, t, v, noise, wick, rng })
    }

    /// `u = v + Z`.
    pub fn u(&self) -> SpectralField {
        let mut u = self.v.clone();
        u.axpy(ONE, &self.noise.z).expect("same grid");
        u
    }

    fn wick_grid(&self) -> Result<WickGrid> {
        let mut orders = self.cfg.orders();
        orders.push((1, 0));
        self.wick.physical(&orders)
    }

    /// `Psi(v)` on the padded grid.
    pub fn drift_physical(&self) -> Result<PhysicalField> {
        Ok(drift_grid(&self.cfg, &self.v.to_physical(), &self.wick_grid()?))
    }

    /// `P_N Psi(v)`.
    pub fn drift(&self) -> Result<SpectralField> {
        if self.cfg.effective_drift() == Drift::Linear {
            return Ok(self.u().scale(self.cfg.params.tau + 1.0));
        }
        SpectralField::from_physical(self.cfg.grid, &self.drift_physical()?)
    }

    fn increment(&self, delta: f64) -> (SpectralField, NoiseStream) {
        let mut rng = self.rng;
        match self.cfg.forcing {
            Forcing::Stochastic => {
                let draws = rng.next_draws(self.cfg.grid);
                (self.noise.increment_from_draws(delta, &draws), rng)
            }
            Forcing::Deterministic => (SpectralField::zeros(self.cfg.grid), rng),
        }
    }

    /// One exponential Euler step with the next noise draws.
    pub fn step(&self, delta: f64) -> Result<Self> {
        let (eta, rng) = self.increment(delta);
        self.advance(delta, &eta, rng)
    }

    /// One step driven by a prescribed OU increment, for refinement studies
    /// where coarse steps reuse a fine noise path.
    pub fn step_with_increment(&self, delta: f64, eta: &SpectralField) -> Result<Self> {
        self.advance(delta, eta, self.rng)
    }

    fn advance(&self, delta: f64, eta: &SpectralField, rng: NoiseStream) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {delta}")));
        }
        let psi = self.drift()?;
        let props = self.cfg.propagators(delta, 0.0);
        let coeffs = self
            .v
            .coeffs()
            .iter()
            .zip(psi.coeffs())
            .zip(props.iter())
            .map(|((&v, &f), &(e, w))| e * v + w * f)
            .collect();
        let v = SpectralField::from_coeffs(self.cfg.grid, coeffs)?;
        let t = self.t + delta;
        check_blowup(&v, t)?;
        let noise = match self.cfg.forcing {
            Forcing::Stochastic => self.noise.evolve_with_increment(delta, eta)?,
            Forcing::Deterministic => OuState { t, ..self.noise.clone() },
        };
        let wick = self.cfg.family(&noise)?;
        Ok(SolverState { cfg: self.cfg, t, v, noise, wick, rng })
    }

    /// Steps until `t_end` (the last step is shortened to land exactly).
    pub fn run_until(&self, t_end: f64, delta: f64) -> Result<Self> {
        let mut s = self.clone();
        let steps = ((t_end - s.t) / delta - 1e-9).ceil().max(0.0) as u64;
        for _ in 0..steps {
            s = s.step(delta)?;
        }
        Ok(s)
    }
}

fn check_blowup(v: &SpectralField, t: f64) -> Result<()> {
    let norm = v.l2_norm_sq().sqrt();
    if !norm.is_finite() || norm > BLOWUP_L2 {
        return Err(Error::BlowUp { t, norm });
    }
    Ok(())
}

pub fn step_exponential_euler(state: &SolverState, delta: f64) -> Result<SolverState> {
    state.step(delta)
}

/// Two copies driven by the same noise, the second one nudged towards the
/// first: `d vt = A vt + lambda (v - vt) + Psi(vt)`. The difference
/// `w = vt - v` is stored as `e^{log_scale} dir` with `||dir||_{L^2} = 1` so
/// that exponential contraction neither underflows nor loses precision.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub primary: SolverState,
    pub dir: SpectralField,
    pub log_scale: f64,
    pub lambda: f64,
}

impl CoupledState {
    pub fn new(primary: SolverState, second_u0: SpectralField, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
        }
        let w = second_u0.regrid(primary.cfg.grid)?.sub(&primary.u())?;
        let (dir, log_scale) = normalize(w)?;
        Ok(CoupledState { primary, dir, log_scale, lambda })
    }

    pub fn t(&self) -> f64 {
        self.primary.t
    }

    /// `ln ||w||_{L^2}^2`, `-inf` when the copies coincide.
    pub fn log_diff_norm_sq(&self) -> f64 {
        let d = self.dir.l2_norm_sq();
        if d == 0.0 {
            f64::NEG_INFINITY
        } else {
            2.0 * self.log_scale + d.ln()
        }
    }

    /// Remainder of the second copy, `v + w`.
    pub fn second_v(&self) -> SpectralField {
        let mut out = self.primary.v.clone();
        if self.dir.l2_norm_sq() > 0.0 {
            out.axpy(C64::new(self.log_scale.exp(), 0.0), &self.dir).expect("same grid");
        }
        out
    }

    /// `[Psi(v + s dir) - Psi(v)] / s` with `s = e^{log_scale}`, expanded so
    /// every term carries at least one factor of `dir`.
    fn difference_drift(&self) -> Result<SpectralField> {
        let p = &self.primary;
        let cfg = p.cfg;
        let lin = cfg.params.tau + 1.0;
        if cfg.effective_drift() == Drift::Linear {
            return Ok(self.dir.scale(lin));
        }
        let m = cfg.params.m;
        let s = self.log_scale.exp();
        let wg = p.wick_grid()?;
        let vg = p.v.to_physical();
        let dg = self.dir.to_physical();
        let naive = cfg.effective_drift() == Drift::Naive;
        let terms = Terms::new(&cfg.params, &wg, !naive);
        let sp: Vec<f64> = (0..=2 * m + 1).map(|e| s.powi(e as i32)).collect();
        let binom: Vec<Vec<f64>> = (0..=m + 1).map(|i| (0..=i).map(|a| binomial(i, a)).collect()).collect();
        let (mut bp, mut bbp) = (vec![ONE; m + 2], vec![ONE; m + 1]);
        let (mut wp, mut wbp) = (vec![ONE; m + 2], vec![ONE; m + 1]);
        let mut data = Vec::with_capacity(vg.data.len());
        for (idx, (&vx, &wx)) in vg.data.iter().zip(&dg.data).enumerate() {
            let base = if naive { vx + terms.z(idx) } else { vx };
            fill_powers(&mut bp, base);
            fill_powers(&mut bbp, base.conj());
            fill_powers(&mut wp, wx);
            fill_powers(&mut wbp, wx.conj());
            let expand = |i: usize, j: usize| {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..=i {
                    for b in 0..=j {
                        if a + b == 0 {
                            continue;
                        }
                        acc += binom[i][a] * binom[j][b] * sp[a + b - 1]
                            * wp[a] * wbp[b] * bp[i - a] * bbp[j - b];
                    }
                }
                acc
            };
            let mut acc = lin * wx;
            if naive {
                acc += -cfg.params.nu * expand(m + 1, m);
            } else {
                for &(i, j, c, sl, flip) in &terms.wick {
                    acc += c * expand(i, j) * Terms::w(sl, flip, idx);
                }
            }
            data.push(acc);
        }
        SpectralField::from_physical(cfg.grid, &PhysicalField { n: vg.n, data })
    }

    pub fn step(&self, delta: f64) -> Result<Self> {
        let primary = self.primary.step(delta)?;
        let mut next = CoupledState { primary, ..self.clone() };
        if self.dir.l2_norm_sq() == 0.0 {
            return Ok(next);
        }
        let d = self.difference_drift()?;
        let props = self.primary.cfg.propagators(delta, self.lambda);
        let coeffs = self
            .dir
            .coeffs()
            .iter()
            .zip(d.coeffs())
            .zip(props.iter())
            .map(|((&w, &f), &(e, q))| e * w + q * f)
            .collect();
        let dir = SpectralField::from_coeffs(self.primary.cfg.grid, coeffs)?;
        if !dir.is_finite() {
            return Err(Error::BlowUp { t: next.t(), norm: f64::INFINITY });
        }
        let (dir, ls) = normalize(dir)?;
        next.dir = dir;
        next.log_scale = self.log_scale + ls;
        Ok(next)
    }
}

fn normalize(w: SpectralField) -> Result<(SpectralField, f64)> {
    let n = w.l2_norm_sq().sqrt();
    if !n.is_finite() {
        return Err(Error::BlowUp { t: f64::NAN, norm: n });
    }
    if n == 0.0 {
        return Ok((w, 0.0));
    }
    Ok((w.scale(C64::new(1.0 / n, 0.0)), n.ln()))
}

pub fn step_coupled(state: &CoupledState, delta: f64) -> Result<CoupledState> {
    state.step(delta)
}

/// Terms of the `L^{2p}` energy balance at one time, with the time derivative
/// of `(1/2p) ||v||_{L^{2p}}^{2p}` taken by a forward difference over one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub p: f64,
    pub delta: f64,
    /// Forward-difference rate of `(1/2p) ||v||^{2p}_{L^{2p}}`.
    pub lhs_rate: f64,
    /// `Re (i+mu) <grad(|v|^{2p-2} vbar), grad v>`.
    pub gradient: f64,
    /// `||v||^{2p}_{L^{2p}}`.
    pub mass: f64,
    /// `Re nu ||v||^{2p+2m}_{L^{2p+2m}}`.
    pub dissipation: f64,
    /// `Re <|v|^{2p-2} vbar, Psi'>` where `Psi' = Psi + nu |v|^{2m} v`.
    pub forcing: f64,
}

impl EnergyReport {
    pub fn rhs(&self) -> f64 {
        -self.gradient - self.mass - self.dissipation + self.forcing
    }

    pub fn residual(&self) -> f64 {
        self.lhs_rate - self.rhs()
    }
}

fn grid_mean(data: impl Iterator<Item = f64>, n: usize) -> f64 {
    data.sum::<f64>() / (n * n) as f64
}

/// `(Re (i+mu) <grad(|v|^{2p-2} vbar), grad v>, mu || |grad v|^2 |v|^{2p-2} ||_{L^1})`,
/// the gradient term of the energy balance and the dissipation it dominates.
pub fn gradient_terms(v: &SpectralField, mu: f64, p: f64) -> Result<(f64, f64)> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    let vg = v.to_physical();
    let d0 = v.derivative(0).to_physical();
    let d1 = v.derivative(1).to_physical();
    let n = vg.n;
    let mut form = C64::new(0.0, 0.0);
    let mut diss = 0.0;
    for idx in 0..n * n {
        let x = vg.data[idx];
        let g = [d0.data[idx], d1.data[idx]];
        let a2 = x.norm_sqr();
        let grad_sq = g[0].norm_sqr() + g[1].norm_sqr();
        let w = if p == 1.0 { 1.0 } else if a2 == 0.0 { 0.0 } else { a2.powf(p - 1.0) };
        let mut term = C64::new(w * grad_sq, 0.0);
        if p != 1.0 && a2 > 0.0 {
            // grad |v|^2 = 2 Re(vbar grad v), so grad(|v|^{2p-2}) = (p-1)|v|^{2p-4} grad|v|^2.
            let pref = (p - 1.0) * a2.powf(p - 2.0) * x.conj();
            for gi in g {
                term += pref * 2.0 * (x.conj() * gi).re * gi;
            }
        }
        form += term;
        diss += w * grad_sq;
    }
    let norm = 1.0 / (n * n) as f64;
    Ok(((C64::new(mu, 1.0) * form * norm).re, mu * diss * norm))
}

/// Evaluates the energy balance of `state` for exponent `p`, advancing a copy
/// by one step of size `delta` for the time derivative.
pub fn energy_report(state: &SolverState, p: f64, delta: f64) -> Result<EnergyReport> {
    if !(1.0..=8.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("energy exponent {p} outside [1, 8]")));
    }
    let cfg = state.cfg;
    let par = cfg.params;
    let m = par.m as i32;
    let f = |v: &SpectralField| -> f64 {
        if p == 1.0 {
            0.5 * v.l2_norm_sq()
        } else {
            let g = v.to_physical();
            grid_mean(g.data.iter().map(|z| z.norm().powf(2.0 * p)), g.n) / (2.0 * p)
        }
    };
    let next = state.step(delta)?;
    let lhs_rate = (f(&next.v) - f(&state.v)) / delta;
    let (gradient, _) = gradient_terms(&state.v, par.mu, p)?;
    let vg = state.v.to_physical();
    let n = vg.n;
    let psi = if cfg.effective_drift() == Drift::Linear {
        state.u().to_physical().map(|u| u * (par.tau + 1.0))
    } else {
        state.drift_physical()?
    };
    let mass = grid_mean(vg.data.iter().map(|z| z.norm().powf(2.0 * p)), n);
    let dissipation = par.nu.re * grid_mean(vg.data.iter().map(|z| z.norm().powf(2.0 * p + 2.0 * m as f64)), n);
    let forcing = grid_mean(
        vg.data.iter().zip(&psi.data).map(|(&x, &ps)| {
            let psi_prime = ps + par.nu * x.norm_sqr().powi(m) * x;
            let w = if p == 1.0 { 1.0 } else { x.norm_sqr().powf(p - 1.0) };
            (w * x.conj() * psi_prime).re
        }),
        n,
    );
    Ok(EnergyReport { p, delta, lhs_rate, gradient, mass, dissipation, forcing })
}

/// Outcome of a converged fixed-point iteration on `[t0, t0 + horizon]`.
#[derive(Clone, Debug)]
pub struct PicardResult {
    /// `v` at the substep times `t0, t0 + h, ..., t0 + horizon`.
    pub trajectory: Vec<SpectralField>,
    pub iterations: usize,
    /// Successive changes `sup_n ||v^{k+1}(t_n) - v^k(t_n)||_{L^2}`.
    pub changes: Vec<f64>,
}

/// Solves the mild formulation on a short horizon by fixed-point iteration,
/// with the drift frozen at the left end of each substep. Starts from the
/// free evolution `e^{tA} v_0` and fails with `HorizonTooLarge` if the
/// iteration diverges or has not converged after `max_iter` rounds. The noise
/// path is the one `state.step` would draw, so a converged result coincides
/// with the exponential Euler trajectory.
pub fn picard_local(
    state: &SolverState,
    horizon: f64,
    substeps: usize,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    if !(horizon > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter("horizon and substeps must be positive".into()));
    }
    let h = horizon / substeps as f64;
    // Noise path at the left endpoints.
    let mut path = Vec::with_capacity(substeps);
    let mut cur = state.clone();
    for _ in 0..substeps {
        path.push(cur.clone());
        let (eta, rng) = cur.increment(h);
        let noise = match cur.cfg.forcing {
            Forcing::Stochastic => cur.noise.evolve_with_increment(h, &eta)?,
            Forcing::Deterministic => OuState { t: cur.t + h, ..cur.noise.clone() },
        };
        cur = SolverState::restore(cur.cfg, cur.t + h, cur.v.clone(), noise, rng)?;
    }
    let props = state.cfg.propagators(h, 0.0);
    let apply = |f: &SpectralField, g: &SpectralField, use_phi: bool| -> SpectralField {
        let coeffs = f
            .coeffs()
            .iter()
            .zip(g.coeffs())
            .zip(props.iter())
            .map(|((&a, &b), &(e, w))| e * a + if use_phi { w * b } else { C64::new(0.0, 0.0) })
            .collect();
        SpectralField::from_coeffs(f.grid(), coeffs).expect("same grid")
    };
    let zero = SpectralField::zeros(state.cfg.grid);
    let mut traj = vec![state.v.clone()];
    for n in 0..substeps {
        traj.push(apply(&traj[n], &zero, false));
    }
    let mut changes = Vec::new();
    for it in 1..=max_iter {
        let mut next = vec![state.v.clone()];
        for n in 0..substeps {
            let left = SolverState { v: traj[n].clone(), ..path[n].clone() };
            let psi = left.drift()?;
            next.push(apply(&next[n], &psi, true));
        }
        let change = traj
            .iter()
            .zip(&next)
            .map(|(a, b)| a.sub(b).map(|d| d.l2_norm_sq().sqrt()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        changes.push(change);
        traj = next;
        if !change.is_finite() || change > BLOWUP_L2 {
            return Err(Error::HorizonTooLarge { horizon, iterations: it, last_change: change });
        }
        if change <= tol {
            return Ok(PicardResult { trajectory: traj, iterations: it, changes });
        }
    }
    Err(Error::HorizonTooLarge {
        horizon,
        iterations: max_iter,
        last_change: changes.last().copied().unwrap_or(f64::NAN),
    })
}

/// Largest horizon of the form `h 2^k <= t_max` on which [`picard_local`]
/// converges, or 0 if even a single substep fails.
pub fn picard_horizon(state: &SolverState, h: f64, t_max: f64, tol: f64, max_iter: usize) -> f64 {
    let mut best = 0.0;
    let mut substeps = 1usize;
    while h * substeps as f64 <= t_max * (1.0 + 1e-12) {
        match picard_local(state, h * substeps as f64, substeps, tol, max_iter) {
            Ok(_) => best = h * substeps as f64,
            Err(_) => break,
        }
        substeps *= 2;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, C64::new(1.0, 0.5), C64::new(0.3, 0.1), 1).unwrap()
    }

    #[test]
    fn rejects_nonpositive_step() {
        let g = GridSpec::new(3, 2).unwrap();
        let cfg = SolverConfig::new(params(), g, Drift::Renormalized, Forcing::Stochastic).unwrap();
        let s = SolverState::new(cfg, SpectralField::zeros(g), NoiseStream::new(1, 0)).unwrap();
        assert!(s.step(0.0).is_err());
        assert!(s.step(-0.1).is_err());
    }

    #[test]
    fn config_checks_padding() {
        let g = GridSpec::new(3, 1).unwrap();
        assert!(SolverConfig::new(params(), g, Drift::Renormalized, Forcing::Stochastic).is_err());
        let lin = ModelParams::new(1.0, C64::new(0.0, 0.0), C64::new(-1.0, 0.0), 1).unwrap();
        assert!(SolverConfig::new(lin, g, Drift::Renormalized, Forcing::Stochastic).is_ok());
    }

    #[test]
    fn blowup_is_reported() {
        let g = GridSpec::new(2, 2).unwrap();
        let p = ModelParams::new(1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
        let cfg = SolverConfig::new(p, g, Drift::Renormalized, Forcing::Deterministic).unwrap();
        let u0 = SpectralField::constant(g, C64::new(1e5, 0.0));
        let s = SolverState::new(cfg, u0, NoiseStream::new(0, 0)).unwrap();
        // Explicit treatment of the cubic term with a huge step is unstable.
        let r = s.run_until(1.0, 0.5);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }
}
