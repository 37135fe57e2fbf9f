//! Bit-exact checkpoints.
//!
//! Byte layout, all fields little-endian, `f64` as IEEE-754 bits:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0   | 8  | magic `HSFCKPT1` |
//! | 8   | 8  | config hash (u64) |
//! | 16  | 8  | N (u64) |
//! | 24  | 8  | L (f64) |
//! | 32  | 32 | eos `a, γ, β, ϱ̄` (4 × f64) |
//! | 64  | 8  | K (u64) |
//! | 72  | 24 | noise `f0, q, α` (3 × f64) |
//! | 96  | 8  | trajectory seed (u64) |
//! | 104 | 8  | accepted step counter (u64) |
//! | 112 | 8  | snapshot index (u64) |
//! | 120 | 8  | stride (f64) |
//! | 128 | 8  | t (f64) |
//! | 136 | 32 | xoshiro256** state (4 × u64) |
//! | 168 | 8  | spare flag (u64, 0 or 1) |
//! | 176 | 8  | spare Gaussian bits (u64) |
//! | 184 | 32 | cumulative dissipation, work, Itô correction, stochastic integral (4 × f64) |
//! | 216 | 8K | Wiener coordinates (K × f64) |
//! | …   | 8N | ϱ (N × f64) |
//! | …   | 8(N+1) | u (N+1 × f64) |

use std::path::Path;

use crate::eos::EosParams;
use crate::rng::RngState;
use crate::{Error, Result};

use super::{FluidState, Grid, Model, Simulation, StepBudget};

pub const MAGIC: &[u8; 8] = b"HSFCKPT1";
const HEADER_LEN: usize = 216;

/// Everything needed to continue a [`Simulation`] bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub grid: Grid,
    pub eos: EosParams,
    pub modes: usize,
    pub f0: f64,
    pub q: f64,
    pub alpha: f64,
    pub seed: u64,
    pub steps: u64,
    pub snapshot_index: u64,
    pub stride: f64,
    pub rng: RngState,
    pub budget: StepBudget,
    pub wiener: Vec<f64>,
    pub state: FluidState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.grid.cells;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (self.modes + 2 * n + 1));
        out.extend_from_slice(MAGIC);
        let u64s = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        let f64s = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
        u64s(&mut out, self.config_hash);
        u64s(&mut out, n as u64);
        f64s(&mut out, self.grid.length);
        for v in [self.eos.a(), self.eos.gamma(), self.eos.beta(), self.eos.rho_bar()] {
            f64s(&mut out, v);
        }
        u64s(&mut out, self.modes as u64);
        for v in [self.f0, self.q, self.alpha] {
            f64s(&mut out, v);
        }
        u64s(&mut out, self.seed);
        u64s(&mut out, self.steps);
        u64s(&mut out, self.snapshot_index);
        f64s(&mut out, self.stride);
        f64s(&mut out, self.state.t);
        for w in self.rng.s {
            u64s(&mut out, w);
        }
        u64s(&mut out, self.rng.spare.is_some() as u64);
        u64s(&mut out, self.rng.spare.unwrap_or(0));
        let b = &self.budget;
        for v in [b.dissipation, b.work, b.ito, b.stochastic] {
            f64s(&mut out, v);
        }
        debug_assert_eq!(out.len(), HEADER_LEN);
        for &v in self.wiener.iter().chain(&self.state.rho).chain(&self.state.u) {
            f64s(&mut out, v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("missing magic or truncated header".into()));
        }
        let mut pos = 8;
        let mut next = || {
            let v = u64::from_le_bytes(bytes[pos..pos + 8].try_into().expect("8 bytes"));
            pos += 8;
            v
        };
        let config_hash = next();
        let n = next() as usize;
        let length = f64::from_bits(next());
        let (a, g, b, rb) = (
            f64::from_bits(next()),
            f64::from_bits(next()),
            f64::from_bits(next()),
            f64::from_bits(next()),
        );
        let modes = next() as usize;
        let (f0, q, alpha) = (f64::from_bits(next()), f64::from_bits(next()), f64::from_bits(next()));
        let seed = next();
        let steps = next();
        let snapshot_index = next();
        let stride = f64::from_bits(next());
        let t = f64::from_bits(next());
        let s = [next(), next(), next(), next()];
        let has_spare = next();
        let spare_bits = next();
        let budget = StepBudget {
            dissipation: f64::from_bits(next()),
            work: f64::from_bits(next()),
            ito: f64::from_bits(next()),
            stochastic: f64::from_bits(next()),
        };
        let expected = HEADER_LEN + 8 * (modes + n + n + 1);
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} bytes for N = {n}, K = {modes}, found {}",
                bytes.len()
            )));
        }
        let floats: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let wiener = floats[..modes].to_vec();
        let rho = floats[modes..modes + n].to_vec();
        let u = floats[modes + n..].to_vec();
        Ok(Checkpoint {
            config_hash,
            grid: Grid::new(n, length)?,
            eos: EosParams::new(a, g, b, rb)?,
            modes,
            f0,
            q,
            alpha,
            seed,
            steps,
            snapshot_index,
            stride,
            rng: RngState {
                s,
                spare: (has_spare == 1).then_some(spare_bits),
            },
            budget,
            wiener,
            state: FluidState { rho, u, t },
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

impl Simulation {
    pub fn checkpoint(&self) -> Checkpoint {
        let m = self.model();
        Checkpoint {
            config_hash: self.config_hash,
            grid: m.grid,
            eos: m.eos,
            modes: m.noise.modes,
            f0: m.noise.f0,
            q: m.noise.q,
            alpha: m.noise.alpha,
            seed: self.seed,
            steps: self.steps,
            snapshot_index: self.snapshot_index,
            stride: self.stride,
            rng: self.rng.state(),
            budget: self.budget,
            wiener: self.wiener.clone(),
            state: self.state.clone(),
        }
    }

    /// Continues from a checkpoint. The grid, pressure law and noise must
    /// match `model`; the trajectory seed is taken from the checkpoint.
    pub fn resume(model: Model, ckpt: Checkpoint) -> Result<Self> {
        let nz = &model.noise;
        if ckpt.grid != model.grid
            || ckpt.eos != model.eos
            || ckpt.modes != nz.modes
            || ckpt.f0.to_bits() != nz.f0.to_bits()
            || ckpt.q.to_bits() != nz.q.to_bits()
            || ckpt.alpha.to_bits() != nz.alpha.to_bits()
        {
            return Err(Error::Checkpoint(
                "checkpoint grid, pressure law or noise does not match the model".into(),
            ));
        }
        Simulation::from_parts(model, ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{simulate, StepParams};
    use super::*;
    use crate::forcing::{ForceSpec, NoiseSpec};

    fn model() -> Model {
        Model {
            grid: Grid::new(24, 1.0).unwrap(),
            eos: EosParams::reference(),
            step: StepParams { mu: 0.1, ..Default::default() },
            noise: NoiseSpec { modes: 5, ..Default::default() },
            force: ForceSpec::Zero,
        }
    }

    #[test]
    fn layout_sizes() {
        let m = model();
        let sim = Simulation::new(m.clone(), FluidState::perturbed(&m.grid, 0.5, 0.1, 1, 0.3), 0.1, 4, 99).unwrap();
        let bytes = sim.checkpoint().to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * (5 + 24 + 25));
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 99);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 24);
    }

    #[test]
    fn truncated_or_foreign_bytes_are_rejected() {
        assert!(Checkpoint::from_bytes(b"short").is_err());
        let m = model();
        let sim = Simulation::new(m.clone(), FluidState::rest(&m.grid, 0.5), 0.1, 4, 0).unwrap();
        let mut bytes = sim.checkpoint().to_bytes();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let m = model();
        let init = FluidState::perturbed(&m.grid, 0.5, 0.1, 1, 0.8);
        let full = simulate(init.clone(), 1.0, 0.1, &m, 31, 7).unwrap();

        let mut sim = Simulation::new(m.clone(), init, 0.1, 31, 7).unwrap();
        for _ in 0..4 {
            sim.advance_stride().unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        write_checkpoint(&path, &sim.checkpoint()).unwrap();
        drop(sim);
        let ckpt = read_checkpoint(&path).unwrap();
        let mut resumed = Simulation::resume(m.clone(), ckpt).unwrap();
        for j in 5..=10 {
            resumed.advance_stride().unwrap();
            let snap = resumed.snapshot().unwrap();
            assert_eq!(snap.state, *full.state(j));
            assert_eq!(snap.wiener, full.wiener(j));
            assert_eq!(snap.steps, full.steps(j));
        }
    }

    #[test]
    fn resume_rejects_mismatched_model() {
        let m = model();
        let sim = Simulation::new(m.clone(), FluidState::rest(&m.grid, 0.5), 0.1, 4, 0).unwrap();
        let mut other = m;
        other.noise.modes = 3;
        assert!(Simulation::resume(other, sim.checkpoint()).is_err());
    }
}
