use std::sync::Arc;

use crate::analysis::EnergyReport;
use crate::{Error, Result};

use crate::eos::EosParams;

use super::{FluidState, Grid, StepBudget, StepParams};

/// One recorded instant of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: FluidState,
    /// Cumulative Wiener coordinates `W_k(t)`.
    pub wiener: Vec<f64>,
    /// Energy exchanges accumulated since `t = 0`.
    pub budget: StepBudget,
    /// Accepted steps since `t = 0`.
    pub steps: u64,
    pub energy: EnergyReport,
}

#[derive(Debug, PartialEq)]
struct TrajectoryData {
    grid: Grid,
    stride: f64,
    seed: u64,
    config_hash: u64,
    snapshots: Vec<Snapshot>,
}

/// Snapshots on a uniform time grid, seen from an origin index.
///
/// Shifting only moves the origin; all cumulative quantities (Wiener
/// coordinates, energy budgets, step counts) are reported relative to it, so
/// the shifted Wiener path starts at zero. Clones share the snapshot data.
#[derive(Debug, Clone)]
pub struct Trajectory {
    data: Arc<TrajectoryData>,
    origin: usize,
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin && self.data == other.data
    }
}

impl Trajectory {
    /// Validates the time grid (`t_j = j · stride`) and `W(t_0) = 0`.
    pub fn from_snapshots(
        grid: Grid,
        stride: f64,
        seed: u64,
        config_hash: u64,
        snapshots: Vec<Snapshot>,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::domain("trajectory needs at least one snapshot"));
        }
        if !(stride > 0.0) {
            return Err(Error::domain(format!("stride must be > 0, got {stride}")));
        }
        for (j, s) in snapshots.iter().enumerate() {
            let expect = j as f64 * stride;
            if (s.state.t - expect).abs() > 1e-9 * stride.max(expect) {
                return Err(Error::domain(format!(
                    "snapshot {j} at t = {} is off the stride grid (expected {expect})",
                    s.state.t
                )));
            }
        }
        if snapshots[0].wiener.iter().any(|&w| w != 0.0) {
            return Err(Error::domain("Wiener coordinates must start at 0"));
        }
        Ok(Trajectory {
            data: Arc::new(TrajectoryData {
                grid,
                stride,
                seed,
                config_hash,
                snapshots,
            }),
            origin: 0,
        })
    }

    /// A noise-free trajectory through the given states, with zero budgets;
    /// state `j` is relabeled to `t = j · stride`.
    pub fn from_states(
        grid: Grid,
        eos: &EosParams,
        params: &StepParams,
        stride: f64,
        states: Vec<FluidState>,
    ) -> Result<Self> {
        let snapshots = states
            .into_iter()
            .enumerate()
            .map(|(j, mut state)| {
                state.t = j as f64 * stride;
                let energy = crate::analysis::energy(&state, eos, params, &grid)?;
                Ok(Snapshot {
                    state,
                    wiener: Vec::new(),
                    budget: StepBudget::default(),
                    steps: 0,
                    energy,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_snapshots(grid, stride, 0, 0, snapshots)
    }

    pub fn grid(&self) -> &Grid {
        &self.data.grid
    }

    pub fn stride(&self) -> f64 {
        self.data.stride
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    pub fn config_hash(&self) -> u64 {
        self.data.config_hash
    }

    /// Absolute index of the origin in the underlying record.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Number of snapshots from the origin on.
    pub fn len(&self) -> usize {
        self.data.snapshots.len() - self.origin
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time horizon covered from the origin.
    pub fn horizon(&self) -> f64 {
        (self.len() - 1) as f64 * self.stride()
    }

    fn raw(&self, j: usize) -> &Snapshot {
        &self.data.snapshots[self.origin + j]
    }

    /// Relative time `j · stride`.
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.stride()
    }

    /// The stored state; its `t` field keeps the absolute simulation time.
    pub fn state(&self, j: usize) -> &FluidState {
        &self.raw(j).state
    }

    pub fn energy(&self, j: usize) -> &EnergyReport {
        &self.raw(j).energy
    }

    pub fn energies(&self) -> impl Iterator<Item = &EnergyReport> + '_ {
        self.data.snapshots[self.origin..].iter().map(|s| &s.energy)
    }

    /// `W(t_j) − W(t_0)` relative to the origin.
    pub fn wiener(&self, j: usize) -> Vec<f64> {
        let base = &self.raw(0).wiener;
        self.raw(j).wiener.iter().zip(base).map(|(w, b)| w - b).collect()
    }

    pub fn modes(&self) -> usize {
        self.raw(0).wiener.len()
    }

    /// Budget accumulated over `[t_0, t_j]`.
    pub fn budget(&self, j: usize) -> StepBudget {
        let a = self.raw(0).budget;
        let b = self.raw(j).budget;
        StepBudget {
            dissipation: b.dissipation - a.dissipation,
            work: b.work - a.work,
            ito: b.ito - a.ito,
            stochastic: b.stochastic - a.stochastic,
        }
    }

    /// Accepted steps over `[t_0, t_j]`.
    pub fn steps(&self, j: usize) -> u64 {
        self.raw(j).steps - self.raw(0).steps
    }

    /// Moves the origin forward by `by` snapshots.
    pub(crate) fn shifted_by(&self, by: usize) -> Result<Self> {
        if by >= self.len() {
            return Err(Error::domain(format!(
                "shift by {by} strides leaves an empty window (length {})",
                self.len()
            )));
        }
        Ok(Trajectory {
            data: Arc::clone(&self.data),
            origin: self.origin + by,
        })
    }
}
