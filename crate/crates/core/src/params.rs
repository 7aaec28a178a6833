use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Coefficients of the equation. `nu = 0` is accepted as the linear regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: f64,
    pub nu: C64,
    pub tau: C64,
    pub m: usize,
    /// Coupling strength for the auxiliary copy, zero when unused.
    #[serde(default)]
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(mu: f64, nu: C64, tau: C64, m: usize) -> Result<Self> {
        let p = ModelParams { mu, nu, tau, m, lambda: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.nu.re.is_finite() && self.nu.im.is_finite()) {
            return Err(Error::InvalidParameter("nu must be finite".into()));
        }
        if self.nu != C64::new(0.0, 0.0) && self.nu.re <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Re nu must be positive (or nu = 0 for the linear regime), got {}",
                self.nu
            )));
        }
        if !(self.tau.re.is_finite() && self.tau.im.is_finite()) {
            return Err(Error::InvalidParameter("tau must be finite".into()));
        }
        if !(1..=8).contains(&self.m) {
            return Err(Error::InvalidParameter(format!("m must be in 1..=8, got {}", self.m)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.nu == C64::new(0.0, 0.0)
    }

    /// Largest `p` for which the dissipation dominates in the energy estimate.
    pub fn max_energy_exponent(&self) -> f64 {
        1.0 + self.mu * (self.mu + (1.0 + self.mu * self.mu).sqrt())
    }

    /// Fraction of `mu ||grad v|^2 |v|^{2p-2}||_{L^1}` that the gradient term
    /// of the energy estimate is guaranteed to dominate.
    pub fn dissipation_fraction(&self, p: f64) -> f64 {
        1.0 - (p - 1.0) / (self.mu * (self.mu + (1.0 + self.mu * self.mu).sqrt()))
    }
}

/// Regularity exponents of the fixed-point space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Exponents {
    /// Defaults for degree `m`: `alpha = alpha' = 0.05`, `beta <= 0.2`, and
    /// `gamma` in the middle of its admissible interval.
    pub fn default_for(m: usize) -> Self {
        let alpha = 0.05;
        let upper = 1.0 / (2 * m + 1) as f64;
        let beta = 0.2f64.min(2.0 * upper - alpha - 0.02).max(0.01);
        let lower = 0.5 * (alpha + beta);
        Exponents { alpha, alpha_prime: alpha, beta, gamma: 0.5 * (lower + upper) }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let upper = 1.0 / (2 * m + 1) as f64;
        let bad = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        if !(self.alpha > 0.0 && self.alpha_prime > 0.0 && self.beta > 0.0) {
            return bad("alpha, alpha' and beta must be positive");
        }
        if self.beta + self.alpha_prime >= 1.0 {
            return bad("beta + alpha' must be below 1");
        }
        let lower = 0.5 * (self.alpha + self.beta);
        if !(self.gamma > lower && self.gamma < upper) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must lie in ({lower}, {upper})",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_values() {
        let one = C64::new(1.0, 0.0);
        assert!(ModelParams::new(0.0, one, one, 1).is_err());
        assert!(ModelParams::new(1.0, C64::new(-1.0, 0.0), one, 1).is_err());
        assert!(ModelParams::new(1.0, one, one, 0).is_err());
        assert!(ModelParams::new(1.0, C64::new(0.0, 0.0), one, 1).is_ok());
        assert!(ModelParams::new(1.0, one, one, 1).unwrap().with_lambda(-1.0).is_err());
    }

    #[test]
    fn default_exponents_are_admissible() {
        for m in 1..=8 {
            Exponents::default_for(m).validate(m).unwrap();
        }
    }

    #[test]
    fn dissipation_fraction_hits_zero_at_threshold() {
        let p = ModelParams::new(2.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), 1).unwrap();
        let pmax = p.max_energy_exponent();
        assert!(p.dissipation_fraction(pmax).abs() < 1e-14);
        assert_eq!(p.dissipation_fraction(1.0), 1.0);
    }
}
