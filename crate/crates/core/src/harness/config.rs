use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eos::EosParams;
use crate::forcing::{ForceSpec, NoiseSpec};
use crate::solver::{mass_fraction_ok, read_checkpoint, FluidState, Grid, Model, StepParams};
use crate::stationarity::{default_dictionary, ObservableDef};
use crate::{Error, Result};

/// `[force]` as written in the config: `kind`, `value`, and `alpha` for drag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForce {
    kind: String,
    #[serde(default)]
    value: f64,
    #[serde(default)]
    alpha: f64,
}

impl From<ForceSpec> for RawForce {
    fn from(f: ForceSpec) -> Self {
        RawForce {
            kind: f.kind().to_string(),
            value: f.value(),
            alpha: match f {
                ForceSpec::Drag { alpha, .. } => alpha,
                _ => 0.0,
            },
        }
    }
}

mod force_serde {
    use super::*;

    pub fn serialize<S: serde::Serializer>(f: &ForceSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawForce::from(*f).serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ForceSpec, D::Error> {
        let raw = RawForce::deserialize(d)?;
        ForceSpec::from_kind(&raw.kind, raw.value, raw.alpha).map_err(serde::de::Error::custom)
    }
}

fn default_force() -> ForceSpec {
    ForceSpec::Zero
}

/// Initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Rest {
        rho0: f64,
        #[serde(default = "default_margin")]
        mass_margin: f64,
    },
    Perturbed {
        rho0: f64,
        amp: f64,
        mode: usize,
        #[serde(default)]
        velocity: f64,
        #[serde(default = "default_margin")]
        mass_margin: f64,
    },
    /// State read from a checkpoint file; its time is reset to 0.
    File {
        path: PathBuf,
        #[serde(default = "default_margin")]
        mass_margin: f64,
    },
}

fn default_margin() -> f64 {
    1e-3
}

impl InitSpec {
    pub fn mass_margin(&self) -> f64 {
        match *self {
            InitSpec::Rest { mass_margin, .. }
            | InitSpec::Perturbed { mass_margin, .. }
            | InitSpec::File { mass_margin, .. } => mass_margin,
        }
    }

    pub fn build(&self, grid: &Grid) -> Result<FluidState> {
        match self {
            InitSpec::Rest { rho0, .. } => Ok(FluidState::rest(grid, *rho0)),
            InitSpec::Perturbed {
                rho0, amp, mode, velocity, ..
            } => {
                if *mode == 0 {
                    return Err(Error::config("init.mode must be >= 1"));
                }
                Ok(FluidState::perturbed(grid, *rho0, *amp, *mode, *velocity))
            }
            InitSpec::File { path, .. } => {
                let ck = read_checkpoint(path)?;
                if ck.grid != *grid {
                    return Err(Error::config(format!(
                        "init file {} has grid N = {}, L = {}; config has N = {}, L = {}",
                        path.display(),
                        ck.grid.cells,
                        ck.grid.length,
                        grid.cells,
                        grid.length
                    )));
                }
                let mut s = ck.state;
                s.t = 0.0;
                Ok(s)
            }
        }
    }
}

/// `[run]`: time horizon, snapshot stride and ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: f64,
    pub stride: f64,
    #[serde(default = "one")]
    pub ensemble: usize,
    /// Window length for the energy-inequality residual table; defaults to
    /// the horizon.
    #[serde(default)]
    pub residual_window: Option<f64>,
    #[serde(default = "yes")]
    pub checkpoints: bool,
    /// Output directory; excluded from the config hash.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// `[kb]`: Krylov–Bogoliubov horizons and gap shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbSpec {
    #[serde(rename = "S")]
    pub horizons: Vec<f64>,
    pub tau: Vec<f64>,
}

/// A complete, validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid,
    #[serde(default = "EosParams::reference")]
    pub eos: EosParams,
    /// `noise.seed` is the master seed of the run.
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(with = "force_serde", default = "default_force")]
    pub force: ForceSpec,
    #[serde(default)]
    pub step: StepParams,
    pub init: InitSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub kb: Option<KbSpec>,
    #[serde(default = "default_dictionary")]
    pub observables: Vec<ObservableDef>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: Grid { cells: 64, length: 1.0 },
            eos: EosParams::reference(),
            noise: NoiseSpec::default(),
            force: ForceSpec::Zero,
            step: StepParams {
                mu: 0.2,
                ..Default::default()
            },
            init: InitSpec::Perturbed {
                rho0: 0.5,
                amp: 0.1,
                mode: 1,
                velocity: 0.5,
                mass_margin: default_margin(),
            },
            run: RunSpec {
                horizon: 4.0,
                stride: 0.1,
                ensemble: 8,
                residual_window: None,
                checkpoints: true,
                out: None,
            },
            kb: None,
            observables: default_dictionary(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML: fixed section and key order, shortest round-trip
    /// floats.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// 64-bit FNV-1a over the UTF-8 bytes of the canonical form with
    /// `run.out` cleared.
    pub fn hash(&self) -> u64 {
        let mut c = self.clone();
        c.run.out = None;
        fnv1a(c.to_toml().as_bytes())
    }

    pub fn master_seed(&self) -> u64 {
        self.noise.seed
    }

    pub fn model(&self) -> Model {
        Model {
            grid: self.grid,
            eos: self.eos,
            step: self.step,
            noise: self.noise.clone(),
            force: self.force,
        }
    }

    pub fn residual_window(&self) -> f64 {
        self.run.residual_window.unwrap_or(self.run.horizon)
    }

    /// KB horizons and shifts, defaulting to `S ∈ {T/4, T/2}`, `τ = stride`.
    pub fn kb_spec(&self) -> KbSpec {
        self.kb.clone().unwrap_or_else(|| KbSpec {
            horizons: vec![self.run.horizon / 4.0, self.run.horizon / 2.0],
            tau: vec![self.run.stride],
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        let r = &self.run;
        if !(r.stride > 0.0 && r.stride.is_finite()) {
            return Err(Error::config(format!("run.stride must be > 0, got {}", r.stride)));
        }
        if !(r.horizon > 0.0 && r.horizon.is_finite()) {
            return Err(Error::config(format!("run.horizon must be > 0, got {}", r.horizon)));
        }
        let n = r.horizon / r.stride;
        if (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::config(format!(
                "run.horizon {} is not a multiple of run.stride {}",
                r.horizon, r.stride
            )));
        }
        if r.ensemble == 0 {
            return Err(Error::config("run.ensemble must be >= 1"));
        }
        if let Some(w) = r.residual_window {
            let k = w / r.stride;
            if !(w > 0.0 && w <= r.horizon) || (k - k.round()).abs() > 1e-9 * k {
                return Err(Error::config(format!(
                    "run.residual_window {w} must be a stride multiple in (0, horizon]"
                )));
            }
        }
        let delta = self.init.mass_margin();
        if !(delta > 0.0 && delta < self.eos.rho_bar()) {
            return Err(Error::config(format!("init.mass_margin must lie in (0, rho_bar), got {delta}")));
        }
        if !matches!(self.init, InitSpec::File { .. }) {
            let s = self.init.build(&self.grid)?;
            self.check_initial(&s)?;
        }
        if let Some(kb) = &self.kb {
            if kb.horizons.is_empty() || kb.horizons.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::config("kb.S must be a nonempty list of positive horizons"));
            }
            if kb.tau.iter().any(|t| !(*t >= 0.0)) {
                return Err(Error::config("kb.tau must be nonnegative"));
            }
        }
        for def in &self.observables {
            crate::stationarity::Observable::from_def(def, &self.grid)?;
        }
        Ok(())
    }

    /// Initial-data admissibility: state invariants and mean density at most
    /// `ϱ̄ − δ`.
    pub fn check_initial(&self, s: &FluidState) -> Result<()> {
        s.validate(&self.grid, &self.eos, self.step.guard_band(&self.eos))
            .map_err(|e| Error::config(format!("initial state: {e}")))?;
        let delta = self.init.mass_margin();
        if !mass_fraction_ok(s, &self.grid, &self.eos, delta) {
            return Err(Error::config(format!(
                "initial mean density exceeds rho_bar - mass_margin = {}",
                self.eos.rho_bar() - delta
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<FluidState> {
        let s = self.init.build(&self.grid)?;
        self.check_initial(&s)?;
        Ok(s)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
