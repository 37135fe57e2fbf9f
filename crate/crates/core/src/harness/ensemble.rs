use serde::Serialize;

use crate::parallel::Executor;
use crate::rng::split_seed;
use crate::solver::{Checkpoint, FluidState, Simulation, Trajectory};
use crate::{Error, Result};

use super::RunConfig;

/// Result of one ensemble member.
#[derive(Debug)]
pub struct Member {
    pub index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<Finished, Failure>,
}

#[derive(Debug)]
pub struct Finished {
    pub trajectory: Trajectory,
    pub checkpoint: Checkpoint,
}

/// A trajectory that stopped early; the snapshots recorded so far are kept.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub partial: Option<Trajectory>,
    pub last_state: Option<FluidState>,
}

#[derive(Debug)]
pub struct Ensemble {
    pub config_hash: u64,
    pub master_seed: u64,
    pub members: Vec<Member>,
}

impl Ensemble {
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.members
            .iter()
            .filter_map(|m| m.outcome.as_ref().ok().map(|f| f.trajectory.clone()))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.members.iter().filter(|m| m.outcome.is_err()).count()
    }
}

/// Runs member `index` with seed `split_seed(master, index)`.
pub fn run_member(cfg: &RunConfig, initial: &FluidState, index: usize) -> Member {
    let hash = cfg.hash();
    let seed = split_seed(cfg.master_seed(), index as u64);
    let outcome = run_one(cfg, initial, seed, hash);
    Member { index, seed, outcome }
}

fn run_one(cfg: &RunConfig, initial: &FluidState, seed: u64, hash: u64) -> std::result::Result<Finished, Failure> {
    let fail = |error: Error| Failure {
        error,
        partial: None,
        last_state: None,
    };
    let n = crate::solver::stride_count(cfg.run.horizon, cfg.run.stride).map_err(fail)?;
    let mut sim = Simulation::new(cfg.model(), initial.clone(), cfg.run.stride, seed, hash).map_err(fail)?;
    let mut snapshots = Vec::with_capacity(n + 1);
    snapshots.push(sim.snapshot().map_err(fail)?);
    for _ in 0..n {
        if let Err(error) = sim.advance_stride().and_then(|_| sim.snapshot().map(|s| snapshots.push(s))) {
            let last_state = match &error {
                Error::Stiffness { last_state, .. } => Some((**last_state).clone()),
                _ => Some(sim.state().clone()),
            };
            let partial = Trajectory::from_snapshots(cfg.grid, cfg.run.stride, seed, hash, snapshots).ok();
            return Err(Failure {
                error,
                partial,
                last_state,
            });
        }
    }
    let checkpoint = sim.checkpoint();
    let trajectory = Trajectory::from_snapshots(cfg.grid, cfg.run.stride, seed, hash, snapshots).map_err(fail)?;
    Ok(Finished { trajectory, checkpoint })
}

/// Runs `run.ensemble` members on the executor. Member failures are
/// recorded, not propagated; configuration errors abort the whole run.
pub fn run_ensemble(cfg: &RunConfig, exec: &Executor) -> Result<Ensemble> {
    cfg.validate()?;
    let initial = cfg.initial_state()?;
    let members = exec.map(cfg.run.ensemble, |i| run_member(cfg, &initial, i));
    Ok(Ensemble {
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed(),
        members,
    })
}

/// Per-member manifest record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberRecord {
    pub index: usize,
    pub seed: u64,
    pub status: &'static str,
    pub snapshots: usize,
    pub steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_state: Option<StateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRecord {
    pub t: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
}

impl Member {
    pub fn record(&self) -> MemberRecord {
        match &self.outcome {
            Ok(f) => MemberRecord {
                index: self.index,
                seed: self.seed,
                status: "ok",
                snapshots: f.trajectory.len(),
                steps: f.checkpoint.steps,
                error: None,
                last_state: None,
            },
            Err(fail) => MemberRecord {
                index: self.index,
                seed: self.seed,
                status: "failed",
                snapshots: fail.partial.as_ref().map_or(0, |t| t.len()),
                steps: fail.partial.as_ref().map_or(0, |t| t.steps(t.len() - 1)),
                error: Some(fail.error.to_string()),
                last_state: fail.last_state.as_ref().map(|s| StateRecord {
                    t: s.t,
                    rho: s.rho.clone(),
                    u: s.u.clone(),
                }),
            },
        }
    }
}
