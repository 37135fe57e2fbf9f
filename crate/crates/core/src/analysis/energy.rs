use serde::{Deserialize, Serialize};

use crate::eos::EosParams;
use crate::solver::{FluidState, Grid, StepParams};
use crate::{Error, Result};

/// Energy bookkeeping of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `Σ ½ ϱ_i ū_i² h`, `ū_i` the mean of the two face velocities of cell `i`.
    pub kinetic: f64,
    /// `Σ P(ϱ_i) h`.
    pub potential: f64,
    pub total: f64,
    /// Dissipation rate `Σ ν (∂ₓu)² h`.
    pub dissipation: f64,
    pub mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// Energy density `E(ϱ, m)` for a raw pair: `½m²/ϱ + P(ϱ)` for `ϱ > 0`,
/// `0` for `(0, 0)` and `+∞` for `(0, m ≠ 0)`.
pub fn energy_density(rho: f64, m: f64, eos: &EosParams) -> Result<f64> {
    if rho.is_nan() || m.is_nan() {
        return Err(Error::Numeric("energy density of NaN input".into()));
    }
    if rho == 0.0 {
        return Ok(if m == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let p = crate::eos::pressure_potential(rho, eos)?;
    Ok(0.5 * m * m / rho + p)
}

/// Computes the [`EnergyReport`] of a solver state.
pub fn energy(state: &FluidState, eos: &EosParams, params: &StepParams, grid: &Grid) -> Result<EnergyReport> {
    let h = grid.h();
    let n = grid.cells;
    if let Some(i) = state.rho.iter().position(|r| r.is_nan()) {
        return Err(Error::NonFinite { term: "density", index: i });
    }
    if let Some(i) = state.u.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite { term: "velocity", index: i });
    }
    let nu = params.nu_eff();
    let (mut kinetic, mut potential, mut diss, mut mass) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let r = state.rho[i];
        let ubar = 0.5 * (state.u[i] + state.u[i + 1]);
        kinetic += 0.5 * r * ubar * ubar;
        potential += crate::eos::pressure_potential(r, eos)?;
        let du = (state.u[i + 1] - state.u[i]) / h;
        diss += nu * du * du;
        mass += r;
    }
    let (kinetic, potential) = (kinetic * h, potential * h);
    Ok(EnergyReport {
        t: state.t,
        kinetic,
        potential,
        total: kinetic + potential,
        dissipation: diss * h,
        mass: mass * h,
        rho_min: state.min_density(),
        rho_max: state.max_density(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_pair_conventions() {
        let eos = EosParams::reference();
        assert_eq!(energy_density(0.0, 0.0, &eos).unwrap(), 0.0);
        assert_eq!(energy_density(0.0, 1.0, &eos).unwrap(), f64::INFINITY);
        assert!(energy_density(f64::NAN, 0.0, &eos).is_err());
        let e = energy_density(0.5, 0.5, &eos).unwrap();
        assert!((e - (0.25 + 7.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn rest_state_energy_is_potential() {
        let grid = Grid::new(16, 1.0).unwrap();
        let s = FluidState::rest(&grid, 0.5);
        let r = energy(&s, &EosParams::reference(), &StepParams::default(), &grid).unwrap();
        assert!((r.total - 7.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.kinetic, 0.0);
        assert_eq!(r.dissipation, 0.0);
        assert!((r.mass - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kinetic_scales_quadratically() {
        let grid = Grid::new(16, 1.0).unwrap();
        let eos = EosParams::reference();
        let p = StepParams::default();
        let s = FluidState::perturbed(&grid, 0.5, 0.1, 1, 0.7);
        let mut s2 = s.clone();
        for v in &mut s2.u {
            *v *= 2.0;
        }
        let a = energy(&s, &eos, &p, &grid).unwrap();
        let b = energy(&s2, &eos, &p, &grid).unwrap();
        assert!((b.kinetic - 4.0 * a.kinetic).abs() < 1e-14);
        assert_eq!(a.potential, b.potential);
        assert_eq!(a.total, a.kinetic + a.potential);
    }

    #[test]
    fn nan_is_rejected() {
        let grid = Grid::new(8, 1.0).unwrap();
        let mut s = FluidState::rest(&grid, 0.5);
        s.u[2] = f64::NAN;
        assert!(energy(&s, &EosParams::reference(), &StepParams::default(), &grid).is_err());
    }
}
