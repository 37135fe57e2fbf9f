//! Hard-sphere pressure law.
//!
//! The family used throughout is `p(ϱ) = a ϱ^γ (ϱ̄ − ϱ)^{−β}`: it vanishes at
//! zero density, is strictly increasing, and blows up at the limit density
//! `ϱ̄` with `(ϱ̄ − ϱ)^β p(ϱ) → p̄ = a ϱ̄^γ`.

use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::{Error, Result};

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-11;

/// Parameters of the hard-sphere pressure family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEos", into = "RawEos")]
pub struct EosParams {
    a: f64,
    gamma: f64,
    beta: f64,
    rho_bar: f64,
    p_bar: f64,
}

#[derive(Serialize, Deserialize)]
struct RawEos {
    a: f64,
    gamma: f64,
    beta: f64,
    rho_bar: f64,
}

impl TryFrom<RawEos> for EosParams {
    type Error = Error;
    fn try_from(r: RawEos) -> Result<Self> {
        EosParams::new(r.a, r.gamma, r.beta, r.rho_bar)
    }
}

impl From<EosParams> for RawEos {
    fn from(p: EosParams) -> Self {
        RawEos {
            a: p.a,
            gamma: p.gamma,
            beta: p.beta,
            rho_bar: p.rho_bar,
        }
    }
}

impl EosParams {
    /// Requires `a > 0`, `γ > 1`, `β > 3`, `ϱ̄ > 0`.
    pub fn new(a: f64, gamma: f64, beta: f64, rho_bar: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("eos: a must be > 0, got {a}")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("eos: gamma must be > 1, got {gamma}")));
        }
        if !(beta > 3.0 && beta.is_finite()) {
            return Err(Error::domain(format!("eos: beta must be > 3, got {beta}")));
        }
        if !(rho_bar > 0.0 && rho_bar.is_finite()) {
            return Err(Error::domain(format!("eos: rho_bar must be > 0, got {rho_bar}")));
        }
        Ok(EosParams {
            a,
            gamma,
            beta,
            rho_bar,
            p_bar: a * rho_bar.powf(gamma),
        })
    }

    /// `a = 1, γ = 2, β = 4, ϱ̄ = 1`.
    pub fn reference() -> Self {
        EosParams::new(1.0, 2.0, 4.0, 1.0).expect("reference parameters are admissible")
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    /// Singular-limit constant `a ϱ̄^γ`.
    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    fn check(&self, rho: f64) -> Result<()> {
        if rho.is_nan() || rho < 0.0 || rho >= self.rho_bar {
            return Err(Error::domain(format!(
                "density {rho} outside [0, {})",
                self.rho_bar
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn pressure_raw(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma) * (self.rho_bar - rho).powf(-self.beta)
    }

    #[inline]
    pub(crate) fn pressure_derivative_raw(&self, rho: f64) -> f64 {
        let gap = self.rho_bar - rho;
        let lead = self.a * self.gamma * rho.powf(self.gamma - 1.0) * gap.powf(-self.beta);
        lead + self.beta * self.pressure_raw(rho) / gap
    }

    /// Sound speed `√p′(ϱ)`, without domain checks.
    #[inline]
    pub(crate) fn sound_speed_raw(&self, rho: f64) -> f64 {
        self.pressure_derivative_raw(rho).sqrt()
    }

    pub(crate) fn pressure_potential_raw(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let (a, g, b, rb) = (self.a, self.gamma, self.beta, self.rho_bar);
        if g == 2.0 {
            // ϱ ∫₀^ϱ a (ϱ̄−s)^{−β} ds
            let anti = ((rb - rho).powf(1.0 - b) - rb.powf(1.0 - b)) / (b - 1.0);
            return Ok(a * rho * anti);
        }
        // With s = ϱ w^{1/(γ−1)} the weight s^{γ−2} ds becomes ϱ^{γ−1}/(γ−1) dw,
        // leaving a smooth integrand peaked at w = 1 when ϱ is close to ϱ̄.
        let e = 1.0 / (g - 1.0);
        let integrand = |w: f64| (rb - rho * w.powf(e)).powf(-b);
        let j = quadrature::integrate(integrand, 0.0, 1.0, QUAD_ABS_TOL, QUAD_REL_TOL)?;
        Ok(a * rho.powf(g) / (g - 1.0) * j)
    }
}

/// `p(ϱ) = a ϱ^γ (ϱ̄ − ϱ)^{−β}` on `[0, ϱ̄)`.
pub fn pressure(rho: f64, params: &EosParams) -> Result<f64> {
    params.check(rho)?;
    Ok(params.pressure_raw(rho))
}

/// Analytic `dp/dϱ`.
pub fn pressure_derivative(rho: f64, params: &EosParams) -> Result<f64> {
    params.check(rho)?;
    Ok(params.pressure_derivative_raw(rho))
}

/// Pressure potential `P(ϱ) = ϱ ∫₀^ϱ p(s)/s² ds`, so that `P′ϱ − P = p`
/// and `P(0) = 0`. Closed form for `γ = 2`, adaptive quadrature otherwise.
pub fn pressure_potential(rho: f64, params: &EosParams) -> Result<f64> {
    params.check(rho)?;
    params.pressure_potential_raw(rho)
}

/// Regularized pressure defined on all of `[0, ∞)`: equal to `p` up to
/// `ϱ̄ − α`, frozen there and continued by `([ϱ − ϱ̄ − 1]⁺)^{γ_app}`.
pub fn approx_pressure(rho: f64, alpha_cap: f64, gamma_app: f64, params: &EosParams) -> Result<f64> {
    if !(alpha_cap > 0.0 && alpha_cap < params.rho_bar) {
        return Err(Error::domain(format!(
            "regularization width {alpha_cap} must lie in (0, {})",
            params.rho_bar
        )));
    }
    if !(gamma_app > 3.0) {
        return Err(Error::domain(format!(
            "regularization exponent must be > 3, got {gamma_app}"
        )));
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::domain(format!("density {rho} must be >= 0")));
    }
    let cut = params.rho_bar - alpha_cap;
    if rho <= cut {
        return Ok(params.pressure_raw(rho));
    }
    let excess = (rho - params.rho_bar - 1.0).max(0.0);
    Ok(params.pressure_raw(cut) + excess.powf(gamma_app))
}
