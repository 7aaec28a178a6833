use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;
use wcgl_core::params::{Exponents, ModelParams};
use wcgl_core::spectral::{required_pad, GridSpec, Mode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Regularity,
    Wellposedness,
    Coupling,
    Ergodicity,
    Verify,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Regularity => "regularity",
            Experiment::Wellposedness => "wellposedness",
            Experiment::Coupling => "coupling",
            Experiment::Ergodicity => "ergodicity",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `||u||_{L^2}^2`.
    L2Norm,
    /// `||u||_{C^{-alpha}}`.
    HolderNorm,
    /// `|u_k|^2` for the modes listed in the experiment section.
    LowModes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cutoff: usize,
    /// Defaults to `m + 1`, the alias-free choice for the drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad: Option<usize>,
    #[serde(default)]
    pub accept_aliasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularitySection {
    pub orders: Vec<[usize; 2]>,
    pub samples: usize,
    pub increment_samples: usize,
    /// Norms are measured in `C^{-alpha}`.
    pub alpha: f64,
    /// Target time-Holder exponent of the increments.
    pub time_exponent: f64,
    pub lags: Vec<f64>,
}

impl Default for RegularitySection {
    fn default() -> Self {
        RegularitySection {
            orders: vec![[1, 0], [1, 1], [2, 1]],
            samples: 1000,
            increment_samples: 200,
            alpha: 0.5,
            time_exponent: 0.5,
            lags: (0..5).map(|i| 10f64.powf(-3.5 + 0.5 * i as f64)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WellposednessSection {
    /// Upper bound for `sup_{t <= envelope_time} t^{p/m} ||v_t||^{2p}_{L^{2p}}`.
    pub envelope_bound: f64,
    pub envelope_time: f64,
    /// Amplitude of the constant member of the initial-data family.
    pub init_amplitude: f64,
    pub family_members: usize,
    pub family_horizon: f64,
    /// Largest allowed ratio between the weighted moments of different initial data.
    pub family_ratio_bound: f64,
    /// Run the energy, refinement and fixed-point diagnostics.
    pub diagnostics: bool,
    pub record_every: usize,
    /// Ensemble size of the naive-versus-renormalized cutoff comparison, 0 to skip it.
    pub renormalization_ensemble: usize,
    pub renormalization_horizon: f64,
    /// Radius of the low-mode `L^2` proxy in that comparison.
    pub proxy_radius: usize,
}

impl Default for WellposednessSection {
    fn default() -> Self {
        WellposednessSection {
            envelope_bound: 10.0,
            envelope_time: 1.0,
            init_amplitude: 3.0,
            family_members: 4,
            family_horizon: 2.0,
            family_ratio_bound: 10.0,
            diagnostics: true,
            record_every: 100,
            renormalization_ensemble: 0,
            renormalization_horizon: 5.0,
            proxy_radius: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    /// Amplitude of the constant initial datum of the nudged copy.
    pub second_amplitude: f64,
    /// Rates are fitted on `[fit_start * T, T]`.
    pub fit_start: f64,
    pub bootstrap: usize,
    /// Every seed must contract for lambda at or above this value.
    pub check_lambda: f64,
    pub max_cv: f64,
    pub budget_gamma: f64,
    pub budget_threshold: f64,
    pub sample_every: usize,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            second_amplitude: 3.0,
            fit_start: 0.25,
            bootstrap: 200,
            check_lambda: 50.0,
            max_cv: 0.5,
            budget_gamma: 2.0,
            budget_threshold: 50.0,
            sample_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicitySection {
    pub amplitude: f64,
    pub burn_in: f64,
    pub sample_every: usize,
    pub modes: Vec<[i64; 2]>,
    pub bootstrap: usize,
    pub bins: usize,
    /// Modes `|k|_inf <= variance_radius` are checked against `1/(2 rho_k)` when `nu = 0`.
    pub variance_radius: usize,
    pub batches: usize,
}

impl Default for ErgodicitySection {
    fn default() -> Self {
        ErgodicitySection {
            amplitude: 5.0,
            burn_in: 0.2,
            sample_every: 10,
            modes: vec![[0, 0], [1, 0], [0, 1], [1, 1]],
            bootstrap: 500,
            bins: 20,
            variance_radius: 4,
            batches: 100,
        }
    }
}

impl ErgodicitySection {
    pub fn mode_list(&self) -> Vec<Mode> {
        self.modes.iter().map(|m| Mode(m[0], m[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CheckpointSection {
    /// Times at which long single-chain runs write a checkpoint.
    pub at: Vec<f64>,
}

fn default_ensemble() -> usize {
    20
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_observables() -> Vec<Observable> {
    vec![Observable::L2Norm, Observable::HolderNorm, Observable::LowModes]
}
fn default_p_list() -> Vec<f64> {
    vec![1.0]
}
fn default_lambda_grid() -> Vec<f64> {
    vec![10.0, 25.0, 50.0, 100.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    pub model: ModelParams,
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Exponents>,
    #[serde(default)]
    pub regularity: RegularitySection,
    #[serde(default)]
    pub wellposedness: WellposednessSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub ergodicity: ErgodicitySection,
    #[serde(default)]
    pub checkpoint: CheckpointSection,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents.unwrap_or_else(|| Exponents::default_for(self.model.m))
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let pad = self.grid.pad.unwrap_or(self.model.m + 1);
        let g = GridSpec::new(self.grid.cutoff, pad).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(if self.grid.accept_aliasing { g.accepting_aliasing() } else { g })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let g = self.grid()?;
        if self.experiment != Experiment::Regularity && !self.model.is_linear() {
            g.check_degree(2 * self.model.m + 1).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(e) = self.exponents {
            e.validate(self.model.m).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.dt > self.horizon {
            return invalid("dt exceeds the horizon");
        }
        if self.ensemble == 0 {
            return invalid("ensemble must be at least 1");
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return invalid("lambda_grid entries must be non-negative");
        }
        let pmax = self.model.max_energy_exponent();
        for &p in &self.p_list {
            if !(1.0..=8.0).contains(&p) {
                return invalid(format!("p = {p} outside [1, 8]"));
            }
            if p > pmax {
                return invalid(format!("p = {p} exceeds the admissible bound {pmax:.4} for mu = {}", self.model.mu));
            }
        }
        let r = &self.regularity;
        if r.orders.iter().any(|o| o[0] + o[1] == 0) {
            return invalid("regularity orders must have positive degree");
        }
        if let Some(o) = r.orders.iter().find(|o| required_pad(o[0] + o[1]) > 8) {
            return invalid(format!("regularity order {o:?} is too large"));
        }
        if r.samples < 2 || r.increment_samples < 2 {
            return invalid("regularity needs at least 2 samples");
        }
        if r.lags.len() < 2 || r.lags.iter().any(|&h| !(h > 0.0)) {
            return invalid("regularity needs at least two positive lags");
        }
        let c = &self.coupling;
        if !(0.0..1.0).contains(&c.fit_start) {
            return invalid("coupling.fit_start must lie in [0, 1)");
        }
        if c.sample_every == 0 || self.ergodicity.sample_every == 0 || self.wellposedness.record_every == 0 {
            return invalid("sample_every must be positive");
        }
        let e = &self.ergodicity;
        if !(0.0..1.0).contains(&e.burn_in) {
            return invalid("ergodicity.burn_in must lie in [0, 1)");
        }
        if e.batches < 2 || e.bins == 0 {
            return invalid("ergodicity needs at least 2 batches and 1 bin");
        }
        if e.modes.iter().any(|m| m[0].unsigned_abs().max(m[1].unsigned_abs()) as usize > self.grid.cutoff) {
            return invalid("ergodicity mode outside the cutoff");
        }
        if self.checkpoint.at.iter().any(|&t| !(t > 0.0 && t < self.horizon)) {
            return invalid("checkpoint times must lie in (0, horizon)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "coupling"
horizon = 1.0
dt = 0.01

[model]
mu = 1.0
nu = [1.0, 0.0]
tau = [0.0, 0.0]
m = 1

[grid]
cutoff = 8
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = Config::parse(MINIMAL).unwrap();
        assert_eq!(c.ensemble, 20);
        assert_eq!(c.grid().unwrap().pad(), 2);
        assert_eq!(c.lambda_grid, vec![10.0, 25.0, 50.0, 100.0]);
        let back = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
        assert!(Config::parse(&MINIMAL.replace("dt = 0.01", "dt = -1.0")).is_err());
        assert!(Config::parse(&MINIMAL.replace("cutoff = 8", "cutoff = 8\npad = 1")).is_err());
        assert!(Config::parse(&MINIMAL.replace("mu = 1.0", "mu = 0.1")).is_ok());
        let p5 = MINIMAL.replace("dt = 0.01", "dt = 0.01\np_list = [5.0]");
        assert!(Config::parse(&p5).is_err());
    }
}
