//! Staggered finite-volume scheme for the 1D system.
//!
//! Densities live in `N` cells, velocities on the `N + 1` faces with both
//! wall faces pinned to zero. One step is operator split:
//!
//! 1. continuity with upwind mass fluxes (flux form, so mass is conserved
//!    to round-off and densities stay positive under the CFL bound);
//! 2. momentum on the dual cells: upwind convection of the face momentum,
//!    explicit pressure gradient of the *updated* density, deterministic
//!    force, Euler–Maruyama noise, then an implicit viscous solve;
//! 3. the wall velocities are re-pinned to zero.
//!
//! Steps that push a density into the guard band below `ϱ̄` are rejected
//! and retried with half the time step.

mod checkpoint;
mod simulate;
mod trajectory;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use simulate::{simulate, stride_count, Simulation};
pub use trajectory::{Snapshot, Trajectory};

use serde::{Deserialize, Serialize};

use crate::eos::EosParams;
use crate::forcing::{self, ForceSpec, NoiseSpec};
use crate::tridiag;
use crate::{Error, Result};

/// Uniform grid on `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "N")]
    pub cells: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl Grid {
    pub fn new(cells: usize, length: f64) -> Result<Self> {
        let g = Grid { cells, length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 4 {
            return Err(Error::config(format!("grid.N must be >= 4, got {}", self.cells)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config(format!("grid.L must be > 0, got {}", self.length)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.cell_center(i)).collect()
    }
}

/// Density per cell, velocity per face, and the time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    /// Uniform density at rest.
    pub fn rest(grid: &Grid, rho0: f64) -> Self {
        FluidState {
            rho: vec![rho0; grid.cells],
            u: vec![0.0; grid.cells + 1],
            t: 0.0,
        }
    }

    /// `ϱ = ϱ₀ + amp cos(mπx/L)` and `u = vel sin(mπx/L)`: the closed-box
    /// acoustic eigenmode `m`. The cosine sums to zero over the cell centers,
    /// so the mass equals `ϱ₀ L` up to round-off.
    pub fn perturbed(grid: &Grid, rho0: f64, amp: f64, mode: usize, vel: f64) -> Self {
        let k = mode as f64 * std::f64::consts::PI / grid.length;
        let rho = (0..grid.cells)
            .map(|i| rho0 + amp * (k * grid.cell_center(i)).cos())
            .collect();
        let mut u: Vec<f64> = (0..=grid.cells)
            .map(|i| vel * (k * grid.node(i)).sin())
            .collect();
        u[0] = 0.0;
        u[grid.cells] = 0.0;
        FluidState { rho, u, t: 0.0 }
    }

    /// Checks shape, no-slip and `0 < ϱ < ϱ̄ − guard`.
    pub fn validate(&self, grid: &Grid, eos: &EosParams, guard: f64) -> Result<()> {
        if self.rho.len() != grid.cells || self.u.len() != grid.cells + 1 {
            return Err(Error::domain(format!(
                "state shape ({}, {}) does not match grid N = {}",
                self.rho.len(),
                self.u.len(),
                grid.cells
            )));
        }
        if self.u[0] != 0.0 || self.u[grid.cells] != 0.0 {
            return Err(Error::domain("wall velocities must be exactly zero"));
        }
        let top = eos.rho_bar() - guard;
        for (i, &r) in self.rho.iter().enumerate() {
            if !(r > 0.0 && r < top) {
                return Err(Error::domain(format!(
                    "density {r} in cell {i} outside (0, {top})"
                )));
            }
        }
        if let Some(i) = self.u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: "velocity", index: i });
        }
        Ok(())
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `∫ϱ dx = Σ ϱ_i h`.
pub fn total_mass(state: &FluidState, grid: &Grid) -> f64 {
    state.rho.iter().sum::<f64>() * grid.h()
}

/// Whether the mean density `M/|Q|` stays at least `delta` below `ϱ̄`.
pub fn mass_fraction_ok(state: &FluidState, grid: &Grid, eos: &EosParams, delta: f64) -> bool {
    total_mass(state, grid) / grid.length <= eos.rho_bar() - delta
}

/// Viscosities and time-step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub mu: f64,
    pub lambda: f64,
    pub cfl: f64,
    /// Guard band below `ϱ̄`, as a fraction of `ϱ̄`.
    pub guard: f64,
    pub dt_max: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams {
            mu: 0.05,
            lambda: 0.0,
            cfl: 0.5,
            guard: 1e-6,
            dt_max: 1e-2,
        }
    }
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!("step.mu must be > 0, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("step.lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(format!("step.cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.guard > 0.0 && self.guard < 1.0) {
            return Err(Error::config(format!("step.guard must lie in (0, 1), got {}", self.guard)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::config(format!("step.dt_max must be > 0, got {}", self.dt_max)));
        }
        Ok(())
    }

    /// Effective 1D viscosity `μ + λ`.
    pub fn nu_eff(&self) -> f64 {
        self.mu + self.lambda
    }

    /// Absolute guard band `guard · ϱ̄`.
    pub fn guard_band(&self, eos: &EosParams) -> f64 {
        self.guard * eos.rho_bar()
    }
}

/// Everything that stays fixed along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub grid: Grid,
    pub eos: EosParams,
    pub step: StepParams,
    pub noise: NoiseSpec,
    pub force: ForceSpec,
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.step.validate()?;
        self.noise.validate()
    }
}

/// CFL-limited step: `cfl · min h/(|u| + √p′(ϱ))`, capped by the viscous
/// limit `h²/(4ν)` and `dt_max`.
pub fn stable_dt(state: &FluidState, params: &StepParams, eos: &EosParams, grid: &Grid) -> f64 {
    let h = grid.h();
    let mut acoustic = f64::INFINITY;
    for (i, &r) in state.rho.iter().enumerate() {
        let speed = state.u[i].abs().max(state.u[i + 1].abs()) + eos.sound_speed_raw(r);
        acoustic = acoustic.min(h / speed);
    }
    let viscous = h * h / (4.0 * params.nu_eff());
    (params.cfl * acoustic).min(viscous).min(params.dt_max)
}

/// Why a step was not accepted.
#[derive(Debug)]
pub enum StepError {
    /// A density left `(0, ϱ̄ − guard)`; retry with a smaller step.
    RetryHalveDt { cell: usize, rho: f64 },
    Fatal(Error),
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Fatal(e)
    }
}

/// Energy exchanged during one step, all integrated over the step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepBudget {
    /// `∫ ν (∂ₓu)² dx dt` with the post-step velocity.
    pub dissipation: f64,
    /// `∫ ϱ g u dx dt`, left point.
    pub work: f64,
    /// `½ Σ_k ∫ ϱ |F_k|² dx dt`, left point.
    pub ito: f64,
    /// `Σ_k (∫ ϱ F_k u dx) ΔW_k`, left point.
    pub stochastic: f64,
}

impl std::ops::AddAssign for StepBudget {
    fn add_assign(&mut self, o: Self) {
        self.dissipation += o.dissipation;
        self.work += o.work;
        self.ito += o.ito;
        self.stochastic += o.stochastic;
    }
}

/// Reusable buffers plus the noise table `f_k φ_k(x_i)` on interior faces.
#[derive(Debug, Clone)]
pub struct Stepper {
    model: Model,
    /// Row-major `(N − 1) × K`.
    noise_table: Vec<f64>,
    /// `Σ_k (f_k φ_k(x_i))²` per interior face.
    noise_power: Vec<f64>,
    flux: Vec<f64>,
    pressure: Vec<f64>,
    conv: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper {
    pub fn new(model: Model) -> Result<Self> {
        model.validate()?;
        let n = model.grid.cells;
        let k = model.noise.modes;
        let mut noise_table = vec![0.0; (n - 1) * k];
        let mut noise_power = vec![0.0; n - 1];
        for face in 1..n {
            let x = model.grid.node(face);
            for mode in 1..=k {
                let v = model.noise.coefficient(mode) * forcing::mode_shape(mode, x, model.grid.length);
                noise_table[(face - 1) * k + mode - 1] = v;
                noise_power[face - 1] += v * v;
            }
        }
        Ok(Stepper {
            model,
            noise_table,
            noise_power,
            flux: vec![0.0; n + 1],
            pressure: vec![0.0; n],
            conv: vec![0.0; n],
            lower: vec![0.0; n - 1],
            diag: vec![0.0; n - 1],
            upper: vec![0.0; n - 1],
            rhs: vec![0.0; n - 1],
            scratch: vec![0.0; n - 1],
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Advances `state` by `dt` using the Wiener increments `dw` (length `K`).
    pub fn advance(
        &mut self,
        state: &FluidState,
        dt: f64,
        dw: &[f64],
    ) -> std::result::Result<(FluidState, StepBudget), StepError> {
        let Model {
            grid,
            eos,
            step: params,
            noise,
            force,
        } = &self.model;
        let n = grid.cells;
        let k_modes = noise.modes;
        if dw.len() != k_modes {
            return Err(Error::domain(format!(
                "expected {k_modes} Wiener increments, got {}",
                dw.len()
            ))
            .into());
        }
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step must be > 0, got {dt}")).into());
        }
        let h = grid.h();
        let lam = dt / h;
        let rho = &state.rho;
        let u = &state.u;

        // continuity
        self.flux[0] = 0.0;
        self.flux[n] = 0.0;
        for i in 1..n {
            let up = if u[i] >= 0.0 { rho[i - 1] } else { rho[i] };
            self.flux[i] = up * u[i];
        }
        let top = eos.rho_bar() - params.guard_band(eos);
        let mut rho_new = vec![0.0; n];
        for i in 0..n {
            let r = rho[i] - lam * (self.flux[i + 1] - self.flux[i]);
            if !r.is_finite() {
                return Err(Error::NonFinite { term: "density", index: i }.into());
            }
            if !(r > 0.0 && r < top) {
                return Err(StepError::RetryHalveDt { cell: i, rho: r });
            }
            rho_new[i] = r;
        }
        for i in 0..n {
            let p = eos.pressure_raw(rho_new[i]);
            if !p.is_finite() {
                return Err(Error::NonFinite { term: "pressure", index: i }.into());
            }
            self.pressure[i] = p;
        }

        // dual-cell convective fluxes at cell centers
        for i in 0..n {
            let g = 0.5 * (self.flux[i] + self.flux[i + 1]);
            let up = if g >= 0.0 { u[i] } else { u[i + 1] };
            self.conv[i] = g * up;
        }

        let nu = params.nu_eff();
        let visc = nu * dt / (h * h);
        let mut budget = StepBudget::default();
        for face in 1..n {
            let j = face - 1;
            let rf_old = 0.5 * (rho[face - 1] + rho[face]);
            let rf_new = 0.5 * (rho_new[face - 1] + rho_new[face]);
            let uf = u[face];
            let x = grid.node(face);
            let g = forcing::deterministic_force(x, rf_old, uf, force);
            let mut m = rf_old * uf - lam * (self.conv[face] - self.conv[face - 1])
                - lam * (self.pressure[face] - self.pressure[face - 1])
                + dt * rf_old * g;
            budget.work += dt * rf_old * g * uf * h;
            if k_modes > 0 {
                let s = forcing::s_alpha(uf, noise.alpha);
                let row = &self.noise_table[j * k_modes..(j + 1) * k_modes];
                let xi: f64 = row.iter().zip(dw).map(|(a, w)| a * w).sum();
                m += rf_old * s * xi;
                budget.ito += 0.5 * dt * rf_old * s * s * self.noise_power[j] * h;
                budget.stochastic += rf_old * s * uf * xi * h;
            }
            if !m.is_finite() {
                return Err(Error::NonFinite { term: "momentum", index: face }.into());
            }
            self.lower[j] = if face > 1 { -visc } else { 0.0 };
            self.upper[j] = if face < n - 1 { -visc } else { 0.0 };
            self.diag[j] = rf_new + 2.0 * visc;
            self.rhs[j] = m;
        }
        tridiag::solve_in_place(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch);

        let mut u_new = vec![0.0; n + 1];
        for face in 1..n {
            let v = self.rhs[face - 1];
            if !v.is_finite() {
                return Err(Error::NonFinite { term: "velocity", index: face }.into());
            }
            u_new[face] = v;
        }
        u_new[0] = 0.0;
        u_new[n] = 0.0;
        let mut diss = 0.0;
        for i in 0..n {
            let du = (u_new[i + 1] - u_new[i]) / h;
            diss += du * du;
        }
        budget.dissipation = dt * nu * diss * h;

        Ok((
            FluidState {
                rho: rho_new,
                u: u_new,
                t: state.t + dt,
            },
            budget,
        ))
    }
}

/// One step of the scheme; see the module docs.
pub fn step(
    state: &FluidState,
    dt: f64,
    increments: &[f64],
    model: &Model,
) -> std::result::Result<FluidState, StepError> {
    let mut stepper = Stepper::new(model.clone())?;
    stepper.advance(state, dt, increments).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_model(n: usize, noise: NoiseSpec, force: ForceSpec) -> Model {
        Model {
            grid: Grid::new(n, 1.0).unwrap(),
            eos: EosParams::reference(),
            step: StepParams {
                mu: 0.05,
                ..Default::default()
            },
            noise,
            force,
        }
    }

    #[test]
    fn grid_rejects_small_or_bad() {
        assert!(Grid::new(3, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, 2.0).is_ok());
    }

    #[test]
    fn step_params_validation() {
        let ok = StepParams::default();
        assert!(ok.validate().is_ok());
        assert!(StepParams { mu: 0.0, ..ok }.validate().is_err());
        assert!(StepParams { lambda: -1.0, ..ok }.validate().is_err());
        assert!(StepParams { cfl: 1.5, ..ok }.validate().is_err());
        assert_eq!(StepParams { mu: 0.1, lambda: 0.2, ..ok }.nu_eff(), 0.1 + 0.2);
    }

    #[test]
    fn stable_dt_acoustic_example() {
        let grid = Grid::new(128, 1.0).unwrap();
        let eos = EosParams::reference();
        let params = StepParams {
            mu: 0.01,
            cfl: 0.5,
            dt_max: 1.0,
            ..Default::default()
        };
        let s = FluidState::rest(&grid, 0.5);
        let dt = stable_dt(&s, &params, &eos, &grid);
        let expect = 0.5 * (1.0 / 128.0) / 48f64.sqrt();
        assert!((dt - expect).abs() < 1e-15);
        assert!((dt - 5.64e-4).abs() < 1e-6);
        // doubling N halves the acoustic step
        let fine = Grid::new(256, 1.0).unwrap();
        let dt2 = stable_dt(&FluidState::rest(&fine, 0.5), &params, &eos, &fine);
        assert!((dt2 / dt - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stable_dt_shrinks_toward_packing() {
        let grid = Grid::new(64, 1.0).unwrap();
        let eos = EosParams::reference();
        let params = StepParams::default();
        let mut prev = f64::INFINITY;
        for r in [0.5, 0.9, 0.99] {
            let dt = stable_dt(&FluidState::rest(&grid, r), &params, &eos, &grid);
            assert!(dt > 0.0 && dt < prev);
            prev = dt;
        }
    }

    #[test]
    fn viscous_and_cap_limits_apply() {
        let grid = Grid::new(16, 1.0).unwrap();
        let eos = EosParams::reference();
        let s = FluidState::rest(&grid, 0.05);
        let visc = StepParams { mu: 10.0, ..Default::default() };
        let h = grid.h();
        assert_eq!(stable_dt(&s, &visc, &eos, &grid), h * h / 40.0);
        let cap = StepParams { mu: 1e-6, dt_max: 1e-7, ..Default::default() };
        assert_eq!(stable_dt(&s, &cap, &eos, &grid), 1e-7);
    }

    #[test]
    fn uniform_rest_state_is_preserved_exactly() {
        let model = reference_model(32, NoiseSpec::default(), ForceSpec::Zero);
        let s = FluidState::rest(&model.grid, 0.5);
        let dw = vec![0.1; model.noise.modes];
        let out = step(&s, 1e-3, &dw, &model).unwrap();
        assert_eq!(out.rho, s.rho);
        assert_eq!(out.u, s.u);
    }

    #[test]
    fn guard_rejection_requests_retry() {
        let model = reference_model(16, NoiseSpec::off(), ForceSpec::Zero);
        let mut s = FluidState::rest(&model.grid, 0.5);
        s.rho[8] = 1.0 - 2e-6;
        for f in 1..16 {
            s.u[f] = if f <= 8 { 5.0 } else { -5.0 };
        }
        match step(&s, 1e-3, &[], &model) {
            Err(StepError::RetryHalveDt { cell, .. }) => assert!((7..=8).contains(&cell)),
            other => panic!("expected retry, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_is_fatal_with_tag() {
        let model = reference_model(8, NoiseSpec::off(), ForceSpec::Zero);
        let mut s = FluidState::rest(&model.grid, 0.5);
        s.u[3] = f64::NAN;
        match step(&s, 1e-3, &[], &model) {
            Err(StepError::Fatal(Error::NonFinite { term, .. })) => assert_eq!(term, "density"),
            Err(StepError::RetryHalveDt { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_is_conserved_and_walls_pinned() {
        let model = reference_model(64, NoiseSpec::default(), ForceSpec::Constant { value: 0.5 });
        let mut stepper = Stepper::new(model.clone()).unwrap();
        let mut s = FluidState::perturbed(&model.grid, 0.5, 0.2, 1, 0.3);
        let m0 = total_mass(&s, &model.grid);
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        let mut dw = vec![0.0; model.noise.modes];
        for _ in 0..2000 {
            let dt = stable_dt(&s, &model.step, &model.eos, &model.grid);
            forcing::fill_increments(dt, &mut dw, &mut rng).unwrap();
            s = stepper.advance(&s, dt, &dw).unwrap().0;
            assert_eq!(s.u[0], 0.0);
            assert_eq!(s.u[64], 0.0);
        }
        let m1 = total_mass(&s, &model.grid);
        assert!(((m1 - m0) / m0).abs() <= 1e-12);
    }

    #[test]
    fn wrong_increment_count_is_rejected() {
        let model = reference_model(8, NoiseSpec::default(), ForceSpec::Zero);
        let s = FluidState::rest(&model.grid, 0.5);
        assert!(matches!(step(&s, 1e-3, &[0.0], &model), Err(StepError::Fatal(_))));
    }

    #[test]
    fn mass_fraction_flag() {
        let grid = Grid::new(8, 1.0).unwrap();
        let eos = EosParams::reference();
        let s = FluidState::rest(&grid, 0.5);
        assert!((total_mass(&s, &grid) - 0.5).abs() < 1e-15);
        assert!(mass_fraction_ok(&s, &grid, &eos, 0.1));
        assert!(!mass_fraction_ok(&s, &grid, &eos, 0.6));
    }
}
