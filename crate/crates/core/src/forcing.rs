//! Stochastic and deterministic forcing.
//!
//! The cylindrical Wiener process is truncated to `K` modes with shapes
//! `φ_k(x) = sin(kπx/L)`, which vanish at both walls. Each mode carries the
//! multiplicative coefficient `F_k(x, ϱ, u) = f_k φ_k(x) s_α(u)` with
//! `f_k = f0 k^{−q}` and `s_α(u) = u (1 + u²)^{(α−1)/2}`.

use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// Truncated noise description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Number of retained modes; 0 switches the noise off.
    #[serde(rename = "K")]
    pub modes: usize,
    pub f0: f64,
    /// Decay exponent of `f_k`, must exceed 1/2.
    pub q: f64,
    /// Growth exponent in `[0, 1)`.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            modes: 16,
            f0: 0.3,
            q: 1.0,
            alpha: 0.5,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        NoiseSpec {
            modes: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 >= 0.0 && self.f0.is_finite()) {
            return Err(Error::config(format!("noise.f0 must be >= 0, got {}", self.f0)));
        }
        if !(self.q > 0.5 && self.q.is_finite()) {
            return Err(Error::config(format!("noise.q must be > 1/2, got {}", self.q)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "noise.alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `f_k = f0 k^{−q}` for `k ≥ 1`.
    pub fn coefficient(&self, k: usize) -> f64 {
        self.f0 * (k as f64).powf(-self.q)
    }

    /// `Σ_{k ≤ K} f_k²`.
    pub fn retained_energy(&self) -> f64 {
        (1..=self.modes).map(|k| self.coefficient(k).powi(2)).sum()
    }

    /// `Σ_{k > K} f_k² = f0² ζ(2q) − Σ_{k ≤ K} f_k²`: the neglected noise
    /// intensity.
    pub fn tail_energy(&self) -> f64 {
        (self.f0 * self.f0 * zeta(2.0 * self.q) - self.retained_energy()).max(0.0)
    }
}

/// Mode shape `sin(kπx/L)`.
#[inline]
pub fn mode_shape(k: usize, x: f64, length: f64) -> f64 {
    (k as f64 * std::f64::consts::PI * x / length).sin()
}

/// `s_α(u) = u (1 + u²)^{(α−1)/2}`; odd, C¹, and bounded by `|u|^α`.
#[inline]
pub fn s_alpha(u: f64, alpha: f64) -> f64 {
    u * (1.0 + u * u).powf(0.5 * (alpha - 1.0))
}

/// `F_k(x, ϱ, u) = f_k φ_k(x) s_α(u)`. `rho` is accepted for interface
/// completeness; these coefficients do not depend on it.
pub fn diffusion_coefficient(
    k: usize,
    x: f64,
    _rho: f64,
    u: f64,
    spec: &NoiseSpec,
    length: f64,
) -> Result<f64> {
    if k == 0 || k > spec.modes {
        return Err(Error::domain(format!(
            "mode index {k} outside 1..={}",
            spec.modes
        )));
    }
    Ok(spec.coefficient(k) * mode_shape(k, x, length) * s_alpha(u, spec.alpha))
}

/// Fills `out` with independent `N(0, dt)` draws.
pub fn fill_increments(dt: f64, out: &mut [f64], rng: &mut Rng) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be > 0, got {dt}")));
    }
    let sd = dt.sqrt();
    for w in out.iter_mut() {
        *w = sd * rng.next_gaussian();
    }
    Ok(())
}

/// `K` independent Wiener increments over a step `dt`.
pub fn sample_increments(dt: f64, modes: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let mut out = vec![0.0; modes];
    fill_increments(dt, &mut out, rng)?;
    Ok(out)
}

/// Deterministic body force per unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceSpec {
    Zero,
    Constant { value: f64 },
    /// `g = −κ s_α(u)`.
    Drag { kappa: f64, alpha: f64 },
}

impl ForceSpec {
    /// Builds a force from its config keys (`force.kind`, `force.value`).
    pub fn from_kind(kind: &str, value: f64, alpha: f64) -> Result<Self> {
        match kind {
            "zero" => Ok(ForceSpec::Zero),
            "constant" | "constant_field" => Ok(ForceSpec::Constant { value }),
            "drag" => {
                if !(value >= 0.0) {
                    return Err(Error::config(format!("drag coefficient must be >= 0, got {value}")));
                }
                Ok(ForceSpec::Drag { kappa: value, alpha })
            }
            other => Err(Error::config(format!(
                "unknown force.kind '{other}' (expected zero, constant or drag)"
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ForceSpec::Zero => "zero",
            ForceSpec::Constant { .. } => "constant",
            ForceSpec::Drag { .. } => "drag",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Constant { value } => value,
            ForceSpec::Drag { kappa, .. } => kappa,
        }
    }

    /// Constant `C` with `|g| ≤ C (1 + |u|^α)`.
    pub fn growth_constant(&self) -> f64 {
        match *self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Constant { value } => value.abs(),
            ForceSpec::Drag { kappa, .. } => kappa,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForceSpec::Zero)
    }
}

/// Force per unit mass at `(x, ϱ, u)`.
#[inline]
pub fn deterministic_force(_x: f64, _rho: f64, u: f64, gspec: &ForceSpec) -> f64 {
    match *gspec {
        ForceSpec::Zero => 0.0,
        ForceSpec::Constant { value } => value,
        ForceSpec::Drag { kappa, alpha } => -kappa * s_alpha(u, alpha),
    }
}

/// `‖v‖_{U₀} = (Σ_k α_k² / k²)^{1/2}` for coefficients indexed from `k = 1`.
pub fn u0_norm(coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let k = (i + 1) as f64;
            a * a / (k * k)
        })
        .sum::<f64>()
        .sqrt()
}

/// Riemann zeta for `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1");
    const N: usize = 64;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let t1 = n.powf(1.0 - s) / (s - 1.0);
    let t2 = 0.5 * n.powf(-s);
    let t3 = s * n.powf(-s - 1.0) / 12.0;
    let t4 = -s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    let t5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0) / 30240.0;
    head + t1 + t2 + t3 + t4 + t5
}

/// Cumulative Wiener coordinates on a uniform grid, stored as the exact
/// increments that were drawn; coordinates are their prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    dt: f64,
    modes: usize,
    /// Row `j` holds the increments over `[t_j, t_{j+1}]`.
    increments: Vec<Vec<f64>>,
    pub seed: u64,
}

impl WienerPath {
    /// Draws `steps` increments for each of `modes` coordinates.
    pub fn sample(modes: usize, dt: f64, steps: usize, seed: u64) -> Result<Self> {
        let mut rng = Rng::seed_from_u64(seed);
        let increments = (0..steps)
            .map(|_| sample_increments(dt, modes, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(WienerPath {
            dt,
            modes,
            increments,
            seed,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of grid points `J + 1`.
    pub fn len(&self) -> usize {
        self.increments.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn increments(&self, j: usize) -> &[f64] {
        &self.increments[j]
    }

    /// `K × (J + 1)` matrix of coordinates, `W_k(t_0) = 0`.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.len()]; self.modes];
        for (j, inc) in self.increments.iter().enumerate() {
            for (k, dw) in inc.iter().enumerate() {
                out[k][j + 1] = out[k][j] + dw;
            }
        }
        out
    }

    /// Path `t ↦ W(t + τ) − W(τ)` for `τ = j0 · dt`.
    pub fn shifted(&self, j0: usize) -> Result<Self> {
        if j0 >= self.len() {
            return Err(Error::domain(format!(
                "shift index {j0} beyond path of length {}",
                self.len()
            )));
        }
        Ok(WienerPath {
            dt: self.dt,
            modes: self.modes,
            increments: self.increments[j0..].to_vec(),
            seed: self.seed,
        })
    }
}
