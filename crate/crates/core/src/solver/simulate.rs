use crate::analysis;
use crate::forcing;
use crate::rng::Rng;
use crate::{Error, Result};

use super::{stable_dt, FluidState, Model, Snapshot, StepBudget, StepError, Stepper, Trajectory};

/// Consecutive step halvings tolerated before giving up.
pub const MAX_HALVINGS: u32 = 40;

/// A running trajectory: the resumable part of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    pub(super) state: FluidState,
    pub(super) rng: Rng,
    pub(super) steps: u64,
    pub(super) wiener: Vec<f64>,
    pub(super) budget: StepBudget,
    pub(super) snapshot_index: u64,
    pub(super) stride: f64,
    pub(super) seed: u64,
    pub(super) config_hash: u64,
    dw: Vec<f64>,
}

impl Simulation {
    pub fn new(model: Model, initial: FluidState, stride: f64, seed: u64, config_hash: u64) -> Result<Self> {
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::domain(format!("stride must be > 0, got {stride}")));
        }
        initial.validate(&model.grid, &model.eos, model.step.guard_band(&model.eos))?;
        let modes = model.noise.modes;
        let mut state = initial;
        state.t = 0.0;
        Ok(Simulation {
            stepper: Stepper::new(model)?,
            state,
            rng: Rng::seed_from_u64(seed),
            steps: 0,
            wiener: vec![0.0; modes],
            budget: StepBudget::default(),
            snapshot_index: 0,
            stride,
            seed,
            config_hash,
            dw: vec![0.0; modes],
        })
    }

    pub(super) fn from_parts(model: Model, parts: super::checkpoint::Checkpoint) -> Result<Self> {
        let modes = model.noise.modes;
        if parts.wiener.len() != modes {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} Wiener coordinates, model has {modes} modes",
                parts.wiener.len()
            )));
        }
        parts
            .state
            .validate(&model.grid, &model.eos, model.step.guard_band(&model.eos))?;
        Ok(Simulation {
            stepper: Stepper::new(model)?,
            state: parts.state,
            rng: Rng::from_state(parts.rng),
            steps: parts.steps,
            wiener: parts.wiener,
            budget: parts.budget,
            snapshot_index: parts.snapshot_index,
            stride: parts.stride,
            seed: parts.seed,
            config_hash: parts.config_hash,
            dw: vec![0.0; modes],
        })
    }

    pub fn model(&self) -> &Model {
        self.stepper.model()
    }

    pub fn state(&self) -> &FluidState {
        &self.state
    }

    pub fn snapshot_index(&self) -> u64 {
        self.snapshot_index
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let m = self.model();
        let energy = analysis::energy(&self.state, &m.eos, &m.step, &m.grid)?;
        Ok(Snapshot {
            state: self.state.clone(),
            wiener: self.wiener.clone(),
            budget: self.budget,
            steps: self.steps,
            energy,
        })
    }

    /// Integrates up to the next snapshot time, clipping the last step so
    /// the snapshot lands exactly on `(index + 1) · stride`.
    pub fn advance_stride(&mut self) -> Result<()> {
        let target = (self.snapshot_index + 1) as f64 * self.stride;
        while self.state.t < target {
            let remaining = target - self.state.t;
            let (grid, eos, params) = {
                let m = self.stepper.model();
                (m.grid, m.eos, m.step)
            };
            let mut dt = stable_dt(&self.state, &params, &eos, &grid);
            let mut clipped = false;
            if dt >= remaining {
                dt = remaining;
                clipped = true;
            }
            let mut halvings = 0;
            loop {
                // Each attempt draws fresh increments for its own dt.
                forcing::fill_increments(dt, &mut self.dw, &mut self.rng)?;
                match self.stepper.advance(&self.state, dt, &self.dw) {
                    Ok((mut next, budget)) => {
                        if clipped {
                            next.t = target;
                        }
                        self.state = next;
                        self.budget += budget;
                        for (w, d) in self.wiener.iter_mut().zip(&self.dw) {
                            *w += d;
                        }
                        self.steps += 1;
                        break;
                    }
                    Err(StepError::RetryHalveDt { .. }) => {
                        if halvings == MAX_HALVINGS {
                            return Err(Error::Stiffness {
                                t: self.state.t,
                                halvings,
                                last_state: Box::new(self.state.clone()),
                            });
                        }
                        halvings += 1;
                        dt *= 0.5;
                        clipped = false;
                    }
                    Err(StepError::Fatal(e)) => return Err(e),
                }
            }
        }
        self.snapshot_index += 1;
        Ok(())
    }
}

/// Number of strides in `horizon`, which must be a positive multiple of
/// `stride`.
pub fn stride_count(horizon: f64, stride: f64) -> Result<usize> {
    if !(horizon > 0.0 && stride > 0.0) {
        return Err(Error::domain(format!(
            "horizon {horizon} and stride {stride} must both be > 0"
        )));
    }
    let n = (horizon / stride).round();
    if n < 1.0 || (n * stride - horizon).abs() > 1e-9 * horizon {
        return Err(Error::domain(format!(
            "horizon {horizon} is not a multiple of the stride {stride}"
        )));
    }
    Ok(n as usize)
}

/// Runs one trajectory on `[0, horizon]`, recording a snapshot every
/// `stride` time units (including `t = 0`).
pub fn simulate(
    initial: FluidState,
    horizon: f64,
    stride: f64,
    model: &Model,
    seed: u64,
    config_hash: u64,
) -> Result<Trajectory> {
    let n = stride_count(horizon, stride)?;
    let mut sim = Simulation::new(model.clone(), initial, stride, seed, config_hash)?;
    let mut snapshots = Vec::with_capacity(n + 1);
    snapshots.push(sim.snapshot()?);
    for _ in 0..n {
        sim.advance_stride()?;
        snapshots.push(sim.snapshot()?);
    }
    Trajectory::from_snapshots(model.grid, stride, seed, config_hash, snapshots)
}
