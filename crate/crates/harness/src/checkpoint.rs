//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "WCGL"  u32 version  u64 config_len  config (UTF-8 TOML)
//! u8 kind (0 single, 1 coupled)  u8 drift  u8 forcing
//! u64 cutoff  u64 pad  u8 accept_aliasing
//! f64 t  u8 origin (0 stationary, 1 zero-start)  f64 origin_s  f64 noise_t
//! v: num_modes x (f64 re, f64 im)   Z: num_modes x (f64 re, f64 im)
//! coupled only: f64 lambda  f64 log_scale  dir: num_modes x (f64 re, f64 im)
//! u64 seed  u64 trajectory  u64 step
//! ```
//!
//! Coefficients are in row-major mode order with `k1` outer. The Wick family
//! is not stored; it is a deterministic function of `Z` and `t`.

use crate::config::{Config, ConfigError};
use std::path::Path;
use thiserror::Error;
use wcgl_core::noise::{NoiseStream, Origin, OuState};
use wcgl_core::solver::{CoupledState, Drift, Forcing, SolverConfig, SolverState};
use wcgl_core::spectral::{GridSpec, SpectralField};
use wcgl_core::C64;

pub const MAGIC: &[u8; 4] = b"WCGL";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("embedded config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] wcgl_core::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Single(SolverState),
    Coupled(CoupledState),
}

impl Snapshot {
    pub fn primary(&self) -> &SolverState {
        match self {
            Snapshot::Single(s) => s,
            Snapshot::Coupled(c) => &c.primary,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: Config,
    pub snapshot: Snapshot,
}

fn drift_code(d: Drift) -> u8 {
    match d {
        Drift::Renormalized => 0,
        Drift::Naive => 1,
        Drift::Linear => 2,
    }
}

fn forcing_code(f: Forcing) -> u8 {
    match f {
        Forcing::Stochastic => 0,
        Forcing::Deterministic => 1,
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn field(&mut self, f: &SpectralField) {
        for c in f.coeffs() {
            self.f64(c.re);
            self.f64(c.im);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated { offset: self.pos, needed: n - (self.buf.len() - self.pos) });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn field(&mut self, grid: GridSpec) -> Result<SpectralField, CheckpointError> {
        let coeffs = (0..grid.num_modes())
            .map(|_| Ok(C64::new(self.f64()?, self.f64()?)))
            .collect::<Result<Vec<_>, CheckpointError>>()?;
        Ok(SpectralField::from_coeffs(grid, coeffs)?)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        let cfg = self.config.to_toml();
        w.u64(cfg.len() as u64);
        w.0.extend_from_slice(cfg.as_bytes());
        let s = self.snapshot.primary();
        w.u8(match self.snapshot {
            Snapshot::Single(_) => 0,
            Snapshot::Coupled(_) => 1,
        });
        w.u8(drift_code(s.cfg.drift));
        w.u8(forcing_code(s.cfg.forcing));
        let g = s.cfg.grid;
        w.u64(g.cutoff() as u64);
        w.u64(g.pad() as u64);
        w.u8(g.accepts_aliasing() as u8);
        w.f64(s.t);
        match s.noise.origin {
            Origin::Stationary => {
                w.u8(0);
                w.f64(0.0);
            }
            Origin::ZeroStart { s } => {
                w.u8(1);
                w.f64(s);
            }
        }
        w.f64(s.noise.t);
        w.field(&s.v);
        w.field(&s.noise.z);
        if let Snapshot::Coupled(c) = &self.snapshot {
            w.f64(c.lambda);
            w.f64(c.log_scale);
            w.field(&c.dir);
        }
        w.u64(s.rng.seed);
        w.u64(s.rng.trajectory);
        w.u64(s.rng.step);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let len = r.u64()?;
        let len = usize::try_from(len).map_err(|_| CheckpointError::Corrupt("config length overflows".into()))?;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| CheckpointError::Corrupt("config is not UTF-8".into()))?;
        let config = Config::parse(text)?;
        let kind = r.u8()?;
        let drift = match r.u8()? {
            0 => Drift::Renormalized,
            1 => Drift::Naive,
            2 => Drift::Linear,
            d => return Err(CheckpointError::Corrupt(format!("unknown drift code {d}"))),
        };
        let forcing = match r.u8()? {
            0 => Forcing::Stochastic,
            1 => Forcing::Deterministic,
            f => return Err(CheckpointError::Corrupt(format!("unknown forcing code {f}"))),
        };
        let cutoff = r.u64()? as usize;
        let pad = r.u64()? as usize;
        let aliasing = r.u8()?;
        if cutoff > 4096 {
            return Err(CheckpointError::Corrupt(format!("implausible cutoff {cutoff}")));
        }
        let mut grid = GridSpec::new(cutoff, pad)?;
        match aliasing {
            0 => {}
            1 => grid = grid.accepting_aliasing(),
            a => return Err(CheckpointError::Corrupt(format!("bad aliasing flag {a}"))),
        }
        let t = r.f64()?;
        let origin_code = r.u8()?;
        let origin_s = r.f64()?;
        let origin = match origin_code {
            0 => Origin::Stationary,
            1 => Origin::ZeroStart { s: origin_s },
            o => return Err(CheckpointError::Corrupt(format!("unknown origin code {o}"))),
        };
        let noise_t = r.f64()?;
        let v = r.field(grid)?;
        let z = r.field(grid)?;
        let coupled = match kind {
            0 => None,
            1 => Some((r.f64()?, r.f64()?, r.field(grid)?)),
            k => return Err(CheckpointError::Corrupt(format!("unknown snapshot kind {k}"))),
        };
        let rng = NoiseStream { seed: r.u64()?, trajectory: r.u64()?, step: r.u64()? };
        if r.pos != buf.len() {
            return Err(CheckpointError::TrailingBytes(buf.len() - r.pos));
        }
        let solver = SolverConfig::new(config.model, grid, drift, forcing)?;
        let noise = OuState { t: noise_t, z, origin, mu: config.model.mu };
        let primary = SolverState::restore(solver, t, v, noise, rng)?;
        let snapshot = match coupled {
            None => Snapshot::Single(primary),
            Some((lambda, log_scale, dir)) => Snapshot::Coupled(CoupledState { primary, dir, log_scale, lambda }),
        };
        Ok(Checkpoint { config, snapshot })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let buf = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
        Self::from_bytes(&buf)
    }
}
