//! Configuration, seed splitting, ensemble execution and persistence.
//!
//! Output tree written by the CLI (all paths relative to `--out`):
//!
//! ```text
//! manifest.json                 run metadata, per-trajectory status
//! energy/traj_NNNN.csv          t,kinetic,potential,total,dissipation,mass,rho_min,rho_max
//! checkpoints/traj_NNNN.ckpt    final state, see solver::Checkpoint
//! moments_mM.csv                t,mean,stderr,m,ensemble_size
//! residuals.csv                 tau1,tau2,residual,seed
//! kb.csv                        observable_id,S,value,gap_tau,gap_value,seed
//! summary.json                  aggregates and the observable dictionary
//! ```

pub mod cli;
mod config;
mod ensemble;
mod output;

use std::path::Path;

use serde::Serialize;

pub use config::{fnv1a, InitSpec, KbSpec, RunConfig, RunSpec};
pub use ensemble::{run_ensemble, run_member, Ensemble, Failure, Finished, Member, MemberRecord, StateRecord};
pub use output::{
    hex_hash, read_energy_csv, read_kb_csv, read_moments_csv, write_energy_csv, write_json, write_kb_csv,
    write_moments_csv, write_residual_csv, KbRow, Manifest, ResidualRow,
};
pub use crate::rng::split_seed;

use crate::analysis::{energy_inequality_residual, moment_series, MomentSeries};
use crate::parallel::Executor;
use crate::solver::{write_checkpoint, Trajectory};
use crate::stationarity::{kb_average, stationarity_gap, Observable, ObservableDef};
use crate::{Error, Result};

/// Residuals over consecutive windows of length `window` on each trajectory.
pub fn residual_table(trajs: &[Trajectory], window: f64) -> Result<Vec<ResidualRow>> {
    let mut rows = Vec::new();
    for t in trajs {
        let k = (window / t.stride()).round() as usize;
        if k == 0 {
            return Err(Error::config(format!("residual window {window} is shorter than one stride")));
        }
        let mut a = 0;
        while a + k < t.len() {
            let (tau1, tau2) = (t.time(a), t.time(a + k));
            rows.push(ResidualRow {
                tau1,
                tau2,
                residual: energy_inequality_residual(t, tau1, tau2)?,
                seed: t.seed(),
            });
            a += k;
        }
    }
    Ok(rows)
}

/// KB averages and gaps for every (trajectory, observable, S, τ), in that
/// nesting order; trajectories are processed on the executor.
pub fn kb_table(
    trajs: &[Trajectory],
    defs: &[ObservableDef],
    horizons: &[f64],
    taus: &[f64],
    exec: &Executor,
) -> Result<Vec<KbRow>> {
    let per_traj = exec.map(trajs.len(), |i| -> Result<Vec<KbRow>> {
        let t = &trajs[i];
        let mut rows = Vec::new();
        for def in defs {
            let obs = Observable::from_def(def, t.grid())?;
            for &s in horizons {
                let value = kb_average(t, &obs, s)?;
                for &tau in taus {
                    rows.push(KbRow {
                        observable_id: def.id.clone(),
                        s,
                        value,
                        gap_tau: tau,
                        gap_value: stationarity_gap(t, &obs, tau, s)?,
                        seed: t.seed(),
                    });
                }
            }
        }
        Ok(rows)
    });
    let mut out = Vec::new();
    for r in per_traj {
        out.extend(r?);
    }
    Ok(out)
}

pub fn moments(trajs: &[Trajectory], orders: &[u32]) -> Result<Vec<MomentSeries>> {
    orders.iter().map(|&m| moment_series(trajs, m)).collect()
}

pub fn manifest(cfg: &RunConfig, ens: &Ensemble, command: &str) -> Manifest {
    let failed = ens.failures();
    Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_hash: hex_hash(ens.config_hash),
        master_seed: ens.master_seed,
        ensemble: ens.members.len(),
        horizon: cfg.run.horizon,
        stride: cfg.run.stride,
        succeeded: ens.members.len() - failed,
        failed,
        trajectories: ens.members.iter().map(Member::record).collect(),
    }
}

/// Writes per-trajectory energy CSVs, final checkpoints (if enabled) and
/// the manifest.
pub fn write_ensemble(out: &Path, cfg: &RunConfig, ens: &Ensemble, command: &str) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for m in &ens.members {
        let name = format!("traj_{:04}", m.index);
        match &m.outcome {
            Ok(f) => {
                write_energy_csv(&out.join("energy").join(format!("{name}.csv")), &f.trajectory)?;
                if cfg.run.checkpoints {
                    let path = out.join("checkpoints").join(format!("{name}.ckpt"));
                    std::fs::create_dir_all(path.parent().expect("has parent"))?;
                    write_checkpoint(&path, &f.checkpoint)?;
                }
            }
            Err(fail) => {
                if let Some(p) = &fail.partial {
                    write_energy_csv(&out.join("energy").join(format!("{name}.csv")), p)?;
                }
            }
        }
    }
    write_json(&out.join("manifest.json"), &manifest(cfg, ens, command))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    pub m: u32,
    pub final_mean: f64,
    pub final_stderr: f64,
    pub max_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub window: f64,
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KbSummary {
    pub observable_id: String,
    #[serde(rename = "S")]
    pub s: f64,
    pub mean: f64,
    /// Sample variance of the per-trajectory averages (ergodic dispersion).
    pub dispersion: f64,
    pub max_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub ensemble: usize,
    pub succeeded: usize,
    pub dictionary: Vec<ObservableDef>,
    pub moments: Vec<MomentSummary>,
    pub residuals: Option<ResidualSummary>,
    pub kb: Vec<KbSummary>,
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(
    cfg: &RunConfig,
    ens: &Ensemble,
    moments: &[MomentSeries],
    residuals: &[ResidualRow],
    kb: &[KbRow],
) -> Summary {
    let moments = moments
        .iter()
        .map(|s| MomentSummary {
            m: s.order,
            final_mean: s.mean[s.len() - 1],
            final_stderr: s.stderr[s.len() - 1],
            max_mean: s.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let residuals = (!residuals.is_empty()).then(|| {
        let r: Vec<f64> = residuals.iter().map(|r| r.residual).collect();
        let (mean, stderr) = mean_stderr(&r);
        ResidualSummary {
            window: cfg.residual_window(),
            count: r.len(),
            mean,
            stderr,
            max: r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    });
    let mut kb_sum: Vec<KbSummary> = Vec::new();
    for def in &cfg.observables {
        for &s in &cfg.kb_spec().horizons {
            let rows: Vec<&KbRow> = kb.iter().filter(|r| r.observable_id == def.id && r.s == s).collect();
            if rows.is_empty() {
                continue;
            }
            // one value per trajectory (first τ row)
            let mut seen = Vec::new();
            let mut values = Vec::new();
            for r in &rows {
                if !seen.contains(&r.seed) {
                    seen.push(r.seed);
                    values.push(r.value);
                }
            }
            let (mean, se) = mean_stderr(&values);
            let n = values.len() as f64;
            kb_sum.push(KbSummary {
                observable_id: def.id.clone(),
                s,
                mean,
                dispersion: if values.len() > 1 { se * se * n } else { f64::NAN },
                max_gap: rows.iter().map(|r| r.gap_value).fold(0.0, f64::max),
            });
        }
    }
    Summary {
        config_hash: hex_hash(ens.config_hash),
        ensemble: ens.members.len(),
        succeeded: ens.members.len() - ens.failures(),
        dictionary: cfg.observables.clone(),
        moments,
        residuals,
        kb: kb_sum,
    }
}
