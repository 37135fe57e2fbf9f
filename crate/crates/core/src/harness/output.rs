use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{EnergyReport, MomentSeries};
use crate::solver::Trajectory;
use crate::{Error, Result};

use super::ensemble::MemberRecord;

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, kinetic, potential, total, dissipation, mass, rho_min, rho_max`.
pub fn write_energy_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_rows(path, traj.energies())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyReport>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<EnergyReport>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MomentRow {
    t: f64,
    mean: f64,
    stderr: f64,
    m: u32,
    ensemble_size: usize,
}

/// Columns `t, mean, stderr, m, ensemble_size`.
pub fn write_moments_csv(path: &Path, s: &MomentSeries) -> Result<()> {
    write_rows(
        path,
        (0..s.len()).map(|j| MomentRow {
            t: s.times[j],
            mean: s.mean[j],
            stderr: s.stderr[j],
            m: s.order,
            ensemble_size: s.ensemble_size,
        }),
    )
}

pub fn read_moments_csv(path: &Path) -> Result<MomentSeries> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<MomentRow>, _>>()?;
    let first = rows
        .first()
        .ok_or_else(|| Error::domain(format!("{} holds no moment rows", path.display())))?;
    if rows.iter().any(|r| r.m != first.m || r.ensemble_size != first.ensemble_size) {
        return Err(Error::domain(format!("{} mixes moment orders or sizes", path.display())));
    }
    Ok(MomentSeries {
        order: first.m,
        ensemble_size: first.ensemble_size,
        times: rows.iter().map(|r| r.t).collect(),
        mean: rows.iter().map(|r| r.mean).collect(),
        stderr: rows.iter().map(|r| r.stderr).collect(),
    })
}

/// Energy-inequality residual over one window of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub tau1: f64,
    pub tau2: f64,
    pub residual: f64,
    pub seed: u64,
}

pub fn write_residual_csv(path: &Path, rows: &[ResidualRow]) -> Result<()> {
    write_rows(path, rows)
}

/// One KB average and one stationarity gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbRow {
    pub observable_id: String,
    #[serde(rename = "S")]
    pub s: f64,
    pub value: f64,
    pub gap_tau: f64,
    pub gap_value: f64,
    pub seed: u64,
}

pub fn write_kb_csv(path: &Path, rows: &[KbRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_kb_csv(path: &Path) -> Result<Vec<KbRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<KbRow>, _>>()?)
}

/// Run metadata. Holds no wall-clock data or paths, so it is identical
/// across worker counts and output locations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub code_version: &'static str,
    pub command: String,
    /// Hex form of the FNV-1a config hash.
    pub config_hash: String,
    pub master_seed: u64,
    pub ensemble: usize,
    pub horizon: f64,
    pub stride: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub trajectories: Vec<MemberRecord>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("JSON encoding: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn hex_hash(h: u64) -> String {
    format!("{h:016x}")
}
