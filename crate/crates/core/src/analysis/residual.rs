use serde::{Deserialize, Serialize};

use crate::eos::EosParams;
use crate::solver::Trajectory;
use crate::{Error, Result};

/// Snapshot indices of a window `[τ₁, τ₂]` on the trajectory's time grid.
pub fn window_indices(traj: &Trajectory, tau1: f64, tau2: f64) -> Result<(usize, usize)> {
    let idx = |tau: f64| -> Result<usize> {
        let x = tau / traj.stride();
        let j = x.round();
        if !(tau >= 0.0) || (x - j).abs() > 1e-9 * x.max(1.0) {
            return Err(Error::domain(format!(
                "window endpoint {tau} is not on the snapshot grid (stride {})",
                traj.stride()
            )));
        }
        let j = j as usize;
        if j >= traj.len() {
            return Err(Error::domain(format!(
                "window endpoint {tau} beyond the horizon {}",
                traj.horizon()
            )));
        }
        Ok(j)
    };
    let (a, b) = (idx(tau1)?, idx(tau2)?);
    if a > b {
        return Err(Error::domain(format!("window [{tau1}, {tau2}] is reversed")));
    }
    Ok((a, b))
}

/// Which terms enter the energy-inequality residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualOptions {
    /// Subtract the Itô correction `½ Σ_k ∫∫ ϱ|F_k|²`.
    pub include_ito: bool,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions { include_ito: true }
    }
}

/// `R = ℰ(τ₂) − ℰ(τ₁) + ∫ν|∂ₓu|² − ∫ϱg·u − ½Σ∫ϱ|F_k|² − Σ∫(∫ϱF_k·u) dW_k`
/// over the window. The energy inequality states `R ≤ 0`.
///
/// The time integrals are the step-resolution sums accumulated during the
/// simulation (left-point for the force, Itô and stochastic terms), i.e. they
/// use exactly the increments that drove the run.
pub fn energy_inequality_residual(traj: &Trajectory, tau1: f64, tau2: f64) -> Result<f64> {
    energy_inequality_residual_with(traj, tau1, tau2, ResidualOptions::default())
}

pub fn energy_inequality_residual_with(
    traj: &Trajectory,
    tau1: f64,
    tau2: f64,
    opts: ResidualOptions,
) -> Result<f64> {
    let (a, b) = window_indices(traj, tau1, tau2)?;
    if a == b {
        return Ok(0.0);
    }
    let ba = traj.budget(a);
    let bb = traj.budget(b);
    let mut r = traj.energy(b).total - traj.energy(a).total + (bb.dissipation - ba.dissipation)
        - (bb.work - ba.work)
        - (bb.stochastic - ba.stochastic);
    if opts.include_ito {
        r -= bb.ito - ba.ito;
    }
    Ok(r)
}

/// Renormalizing function `b` in the renormalized continuity equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Renormalizer {
    Id,
    Xlogx,
    Const { c: f64 },
}

impl Renormalizer {
    pub fn parse(kind: &str, c: f64) -> Result<Self> {
        match kind {
            "id" => Ok(Renormalizer::Id),
            "xlogx" => Ok(Renormalizer::Xlogx),
            "const" => Ok(Renormalizer::Const { c }),
            other => Err(Error::config(format!(
                "unknown renormalizer '{other}' (expected id, xlogx or const)"
            ))),
        }
    }

    fn b(&self, r: f64) -> f64 {
        match *self {
            Renormalizer::Id => r,
            Renormalizer::Xlogx => r * r.ln(),
            Renormalizer::Const { c } => c,
        }
    }

    /// `b′(ϱ)ϱ − b(ϱ)`.
    fn defect(&self, r: f64) -> f64 {
        match *self {
            Renormalizer::Id => 0.0,
            Renormalizer::Xlogx => r,
            Renormalizer::Const { c } => -c,
        }
    }
}

/// Discrete residual of the renormalized continuity equation
/// `[∫b(ϱ)ψ] − ∫∫ b(ϱ) u ∂ₓψ + ∫∫ (b′(ϱ)ϱ − b(ϱ)) ∂ₓu ψ` over `[τ₁, τ₂]`.
///
/// `psi` is sampled at cell centers; `∂ₓψ` uses centered differences
/// (one-sided at the walls), `u` is averaged to cells and `∂ₓu` is the
/// staggered cell divergence. Time integrals use the trapezoid rule on the
/// snapshots.
pub fn renorm_residual(traj: &Trajectory, b: Renormalizer, psi: &[f64], tau1: f64, tau2: f64) -> Result<f64> {
    let grid = traj.grid();
    let n = grid.cells;
    if psi.len() != n {
        return Err(Error::domain(format!("test function has {} samples, grid has {n}", psi.len())));
    }
    let (a, z) = window_indices(traj, tau1, tau2)?;
    let h = grid.h();
    let dpsi: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                (psi[1] - psi[0]) / h
            } else if i == n - 1 {
                (psi[n - 1] - psi[n - 2]) / h
            } else {
                (psi[i + 1] - psi[i - 1]) / (2.0 * h)
            }
        })
        .collect();
    let mass_term = |j: usize| -> f64 {
        let s = traj.state(j);
        s.rho.iter().zip(psi).map(|(r, p)| b.b(*r) * p).sum::<f64>() * h
    };
    let flux_term = |j: usize| -> f64 {
        let s = traj.state(j);
        let mut acc = 0.0;
        for i in 0..n {
            let r = s.rho[i];
            let ubar = 0.5 * (s.u[i] + s.u[i + 1]);
            let div = (s.u[i + 1] - s.u[i]) / h;
            acc += -b.b(r) * ubar * dpsi[i] + b.defect(r) * div * psi[i];
        }
        acc * h
    };
    let dt = traj.stride();
    let mut integral = 0.0;
    for j in a..z {
        integral += 0.5 * dt * (flux_term(j) + flux_term(j + 1));
    }
    Ok(mass_term(z) - mass_term(a) + integral)
}

/// `∫∫ p(ϱ) (ϱ̄ − ϱ)^{−ω} dx dt` over the window, midpoint in space and
/// trapezoid in time. Requires `0 < ω ≤ (β − 3)/2`.
pub fn pressure_weight_integral(traj: &Trajectory, eos: &EosParams, omega: f64, tau1: f64, tau2: f64) -> Result<f64> {
    let top = (eos.beta() - 3.0) / 2.0;
    if !(omega > 0.0 && omega <= top) {
        return Err(Error::domain(format!("weight exponent {omega} outside (0, {top}]")));
    }
    let (a, z) = window_indices(traj, tau1, tau2)?;
    let h = traj.grid().h();
    let rb = eos.rho_bar();
    let space = |j: usize| -> Result<f64> {
        let mut acc = 0.0;
        for &r in &traj.state(j).rho {
            acc += crate::eos::pressure(r, eos)? * (rb - r).powf(-omega);
        }
        Ok(acc * h)
    };
    let dt = traj.stride();
    let mut total = 0.0;
    let mut prev = space(a)?;
    for j in a + 1..=z {
        let cur = space(j)?;
        total += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    Ok(total)
}
