//! Time shifts and Krylov–Bogoliubov averages over a finite observable
//! dictionary.
//!
//! Every observable is squashed through `tanh(s ·)`, so values and averages
//! lie in `[−1, 1]`. Shifts are restricted to the snapshot grid.

use serde::{Deserialize, Serialize};

use crate::solver::Grid;
use crate::{Error, Result};

pub use crate::solver::Trajectory;

fn grid_steps(traj: &Trajectory, tau: f64, what: &str) -> Result<usize> {
    let x = tau / traj.stride();
    let k = x.round();
    if !(tau >= 0.0) || !tau.is_finite() || (x - k).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::domain(format!(
            "{what} = {tau} is not a multiple of the stride {}",
            traj.stride()
        )));
    }
    Ok(k as usize)
}

/// `S_τ`: the trajectory seen from `τ` on, with Wiener coordinates rebased
/// to start at zero and times relabeled from zero.
pub fn shift(traj: &Trajectory, tau: f64) -> Result<Trajectory> {
    let k = grid_steps(traj, tau, "shift")?;
    traj.shifted_by(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    BoundedMomentumPairing,
    BoundedEnergy,
    BoundedDensityPairing,
}

/// Serializable description of an observable; the test field is
/// `ξ(x) = sin(mode · π x / L)` at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDef {
    pub id: String,
    pub kind: ObservableKind,
    #[serde(default)]
    pub mode: Option<u32>,
    /// Averaging window in strides.
    #[serde(default = "one")]
    pub window: usize,
    #[serde(default = "one_f")]
    pub scale: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

/// A bounded functional of a trajectory window starting at relative time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub id: String,
    pub kind: ObservableKind,
    pub xi: Option<Vec<f64>>,
    pub window: usize,
    pub scale: f64,
}

impl Observable {
    pub fn new(id: impl Into<String>, kind: ObservableKind, xi: Option<Vec<f64>>, window: usize, scale: f64) -> Result<Self> {
        let id = id.into();
        if window < 1 {
            return Err(Error::config(format!("observable {id}: window must be >= 1")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!("observable {id}: scale must be > 0, got {scale}")));
        }
        let needs_field = kind != ObservableKind::BoundedEnergy;
        if needs_field != xi.is_some() {
            return Err(Error::config(format!(
                "observable {id}: pairings need a test field, bounded_energy takes none"
            )));
        }
        if let Some(x) = &xi {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("observable {id}: test field is not finite")));
            }
        }
        Ok(Observable { id, kind, xi, window, scale })
    }

    pub fn from_def(def: &ObservableDef, grid: &Grid) -> Result<Self> {
        let xi = match (def.kind, def.mode) {
            (ObservableKind::BoundedEnergy, None) => None,
            (ObservableKind::BoundedEnergy, Some(_)) => {
                return Err(Error::config(format!("observable {}: bounded_energy takes no mode", def.id)))
            }
            (_, None) => return Err(Error::config(format!("observable {}: pairing needs a mode", def.id))),
            (_, Some(k)) => {
                if k == 0 {
                    return Err(Error::config(format!("observable {}: mode must be >= 1", def.id)));
                }
                let w = k as f64 * std::f64::consts::PI / grid.length;
                Some(grid.cell_centers().iter().map(|x| (w * x).sin()).collect())
            }
        };
        Observable::new(def.id.clone(), def.kind, xi, def.window, def.scale)
    }

    fn raw_at(&self, traj: &Trajectory, j: usize) -> f64 {
        let s = traj.state(j);
        let h = traj.grid().h();
        match self.kind {
            ObservableKind::BoundedEnergy => traj.energy(j).total,
            ObservableKind::BoundedDensityPairing => {
                let xi = self.xi.as_deref().unwrap_or_default();
                s.rho.iter().zip(xi).map(|(r, x)| r * x).sum::<f64>() * h
            }
            ObservableKind::BoundedMomentumPairing => {
                let xi = self.xi.as_deref().unwrap_or_default();
                (0..s.rho.len())
                    .map(|i| s.rho[i] * 0.5 * (s.u[i] + s.u[i + 1]) * xi[i])
                    .sum::<f64>()
                    * h
            }
        }
    }

    /// Strides each evaluation occupies past its start.
    pub fn span(&self) -> usize {
        self.window
    }

    fn check(&self, traj: &Trajectory) -> Result<()> {
        if let Some(xi) = &self.xi {
            if xi.len() != traj.grid().cells {
                return Err(Error::domain(format!(
                    "observable {}: test field has {} samples, grid has {}",
                    self.id,
                    xi.len(),
                    traj.grid().cells
                )));
            }
        }
        Ok(())
    }

    /// Value on `S_{t_j}` for every start `j` whose window fits.
    pub fn series(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check(traj)?;
        let span = self.span();
        if traj.len() <= span {
            return Err(Error::domain(format!(
                "observable {} needs {} strides, trajectory has {}",
                self.id,
                span,
                traj.len() - 1
            )));
        }
        let raw: Vec<f64> = (0..traj.len()).map(|j| self.raw_at(traj, j)).collect();
        let starts = traj.len() - span;
        let out = match self.kind {
            ObservableKind::BoundedEnergy => raw[..starts].iter().map(|v| (self.scale * v).tanh()).collect(),
            _ => {
                // trapezoid over [t, t + ℓ], divided by ℓ
                let l = self.window as f64;
                (0..starts)
                    .map(|j| {
                        let w = &raw[j..=j + self.window];
                        let inner: f64 = w[1..w.len() - 1].iter().sum();
                        let avg = (0.5 * (w[0] + w[w.len() - 1]) + inner) / l;
                        (self.scale * avg).tanh()
                    })
                    .collect()
            }
        };
        Ok(out)
    }

    /// Value on the trajectory itself (start at relative time 0).
    pub fn evaluate(&self, traj: &Trajectory) -> Result<f64> {
        Ok(self.series(traj)?[0])
    }
}

/// Default dictionary: momentum pairings with sine modes 1–4, density
/// pairings with modes 1–3 and the bounded energy, all with unit window and
/// scale.
pub fn default_dictionary() -> Vec<ObservableDef> {
    let mut out = Vec::new();
    for k in 1..=4 {
        out.push(ObservableDef {
            id: format!("momentum_{k}"),
            kind: ObservableKind::BoundedMomentumPairing,
            mode: Some(k),
            window: 1,
            scale: 1.0,
        });
    }
    for k in 1..=3 {
        out.push(ObservableDef {
            id: format!("density_{k}"),
            kind: ObservableKind::BoundedDensityPairing,
            mode: Some(k),
            window: 1,
            scale: 1.0,
        });
    }
    out.push(ObservableDef {
        id: "energy".into(),
        kind: ObservableKind::BoundedEnergy,
        mode: None,
        window: 1,
        scale: 1.0,
    });
    out
}

/// Number of Riemann terms `J = ⌈S / stride⌉` for horizon `S`.
fn riemann_terms(traj: &Trajectory, s: f64) -> Result<usize> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!("averaging horizon must be > 0, got {s}")));
    }
    let x = s / traj.stride();
    let j = if (x - x.round()).abs() <= 1e-9 * x { x.round() } else { x.ceil() };
    Ok(j as usize)
}

fn average_of(series: &[f64], offset: usize, terms: usize, needed: f64, available: f64) -> Result<f64> {
    if offset + terms > series.len() {
        return Err(Error::domain(format!(
            "averaging needs a horizon of {needed}, trajectory provides {available}"
        )));
    }
    // centered on the first term so constant series average exactly
    let w = &series[offset..offset + terms];
    let sum: f64 = w.iter().map(|v| v - w[0]).sum();
    Ok(w[0] + sum / terms as f64)
}

/// `ν_S(F) ≈ (1/J) Σ_{j<J} F(S_{t_j})` with `J = ⌈S/stride⌉`.
pub fn kb_average(traj: &Trajectory, obs: &Observable, s: f64) -> Result<f64> {
    let terms = riemann_terms(traj, s)?;
    let series = obs.series(traj)?;
    let needed = (terms + obs.span() - 1) as f64 * traj.stride();
    average_of(&series, 0, terms, needed, traj.horizon())
}

/// `|ν_S(F ∘ S_τ) − ν_S(F)|`; bounded by `2τ/S · sup|F|`.
pub fn stationarity_gap(traj: &Trajectory, obs: &Observable, tau: f64, s: f64) -> Result<f64> {
    let k = grid_steps(traj, tau, "gap shift")?;
    let terms = riemann_terms(traj, s)?;
    let series = obs.series(traj)?;
    let needed = (terms + k + obs.span() - 1) as f64 * traj.stride();
    let a = average_of(&series, 0, terms, needed, traj.horizon())?;
    let b = average_of(&series, k, terms, needed, traj.horizon())?;
    Ok((b - a).abs())
}

/// `|ν_{S_{i+1}}(F) − ν_{S_i}(F)|` for consecutive horizons.
pub fn kb_convergence(traj: &Trajectory, obs: &Observable, horizons: &[f64]) -> Result<Vec<f64>> {
    if horizons.len() < 2 {
        return Err(Error::domain("kb_convergence needs at least two horizons"));
    }
    if horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("horizons must be strictly increasing"));
    }
    let series = obs.series(traj)?;
    let mut values = Vec::with_capacity(horizons.len());
    for &s in horizons {
        let terms = riemann_terms(traj, s)?;
        let needed = (terms + obs.span() - 1) as f64 * traj.stride();
        values.push(average_of(&series, 0, terms, needed, traj.horizon())?);
    }
    Ok(values.windows(2).map(|w| (w[1] - w[0]).abs()).collect())
}

/// Unbiased sample variance of the per-trajectory KB averages.
pub fn ergodic_dispersion(ensemble: &[Trajectory], obs: &Observable, s: f64) -> Result<f64> {
    if ensemble.len() < 2 {
        return Err(Error::domain(format!(
            "ergodic dispersion needs at least 2 trajectories, got {}",
            ensemble.len()
        )));
    }
    let values = ensemble
        .iter()
        .map(|t| kb_average(t, obs, s))
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let d: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let mean = d.iter().sum::<f64>() / n;
    Ok(d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosParams;
    use crate::forcing::{ForceSpec, NoiseSpec};
    use crate::solver::{simulate, FluidState, Model, StepParams};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(16, 1.0).unwrap()
    }

    fn frozen(states: Vec<FluidState>, stride: f64) -> Trajectory {
        Trajectory::from_states(grid(), &EosParams::reference(), &StepParams::default(), stride, states).unwrap()
    }

    fn constant(len: usize) -> Trajectory {
        let s = FluidState::perturbed(&grid(), 0.5, 0.1, 1, 0.3);
        frozen(vec![s; len], 0.5)
    }

    fn energy_obs(scale: f64) -> Observable {
        Observable::new("e", ObservableKind::BoundedEnergy, None, 1, scale).unwrap()
    }

    fn noisy() -> Trajectory {
        let model = Model {
            grid: grid(),
            eos: EosParams::reference(),
            step: StepParams { mu: 0.2, ..Default::default() },
            noise: NoiseSpec::default(),
            force: ForceSpec::Zero,
        };
        let init = FluidState::perturbed(&model.grid, 0.5, 0.1, 1, 0.5);
        simulate(init, 2.0, 0.1, &model, 5, 0).unwrap()
    }

    #[test]
    fn shift_identity_rebasing_and_semigroup() {
        let t = noisy();
        assert_eq!(shift(&t, 0.0).unwrap(), t);
        let s = shift(&t, 0.5).unwrap();
        assert!(s.wiener(0).iter().all(|&w| w == 0.0));
        assert_eq!(s.state(0), t.state(5));
        assert_eq!(s.time(0), 0.0);
        let ab = shift(&shift(&t, 0.3).unwrap(), 0.4).unwrap();
        assert_eq!(ab, shift(&t, 0.7).unwrap());
        for j in 0..ab.len() {
            assert_eq!(ab.state(j), t.state(j + 7));
        }
        assert!(shift(&t, 0.25).is_err());
        assert_eq!(shift(&t, 2.0).unwrap().len(), 1);
        assert!(shift(&t, 2.1).is_err());
    }

    #[test]
    fn constant_trajectory_averages() {
        let t = constant(41);
        let obs = energy_obs(0.3);
        let v = obs.evaluate(&t).unwrap();
        assert_eq!(kb_average(&t, &obs, 10.0).unwrap(), v);
        assert_eq!(stationarity_gap(&t, &obs, 2.0, 10.0).unwrap(), 0.0);
        assert_eq!(kb_convergence(&t, &obs, &[2.0, 4.0, 8.0, 16.0]).unwrap(), vec![0.0; 3]);
        let ens = vec![t.clone(), t.clone(), t];
        assert_eq!(ergodic_dispersion(&ens, &obs, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_horizon_names_lengths() {
        let t = constant(11);
        let err = kb_average(&t, &energy_obs(1.0), 6.0).unwrap_err().to_string();
        assert!(err.contains("horizon of 6,") && err.contains("provides 5"), "{err}");
        assert!(kb_average(&t, &energy_obs(1.0), 4.5).is_ok());
        assert!(stationarity_gap(&t, &energy_obs(1.0), 0.3, 2.0).is_err());
    }

    fn periodic(period: usize, len: usize) -> (Trajectory, Vec<f64>) {
        let g = grid();
        let states: Vec<FluidState> = (0..len)
            .map(|j| {
                let phase = (j % period) as f64 / period as f64;
                FluidState::perturbed(&g, 0.5, 0.05 + 0.1 * phase, 1, 0.0)
            })
            .collect();
        let t = frozen(states, 0.25);
        let obs = energy_obs(0.5);
        let series = obs.series(&t).unwrap();
        (t, series)
    }

    #[test]
    fn periodic_average_matches_one_period() {
        let p = 7;
        let (t, series) = periodic(p, 200);
        let obs = energy_obs(0.5);
        let one_period: f64 = series[..p].iter().sum::<f64>() / p as f64;
        for n in [1, 3, 10, 20] {
            let s = (n * p) as f64 * 0.25;
            assert!((kb_average(&t, &obs, s).unwrap() - one_period).abs() < 1e-12);
        }
        let osc = series[..p].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - series[..p].iter().cloned().fold(f64::INFINITY, f64::min);
        for terms in [9usize, 15, 40, 101] {
            let s = terms as f64 * 0.25;
            let err = (kb_average(&t, &obs, s).unwrap() - one_period).abs();
            assert!(err <= p as f64 / terms as f64 * osc + 1e-14);
        }
        let horizons: Vec<f64> = [10usize, 20, 40, 80].iter().map(|&m| m as f64 * 0.25).collect();
        let diffs = kb_convergence(&t, &obs, &horizons).unwrap();
        for (i, d) in diffs.iter().enumerate() {
            assert!(*d <= 2.0 * p as f64 / (horizons[i] / 0.25) * osc + 1e-14);
        }
    }

    #[test]
    fn pairings_use_trapezoid_window() {
        let g = grid();
        let states: Vec<FluidState> = (0..5).map(|j| FluidState::rest(&g, 0.2 + 0.1 * j as f64)).collect();
        let t = frozen(states, 1.0);
        let def = ObservableDef {
            id: "d".into(),
            kind: ObservableKind::BoundedDensityPairing,
            mode: Some(1),
            window: 2,
            scale: 1.0,
        };
        let obs = Observable::from_def(&def, &g).unwrap();
        let xi_int: f64 = obs.xi.as_ref().unwrap().iter().sum::<f64>() * g.h();
        // densities 0.2, 0.3, 0.4 → trapezoid mean 0.3
        let expect = (0.3 * xi_int).tanh();
        assert!((obs.evaluate(&t).unwrap() - expect).abs() < 1e-14);
        assert_eq!(obs.series(&t).unwrap().len(), 3);
        let bad = ObservableDef { mode: None, ..def.clone() };
        assert!(Observable::from_def(&bad, &g).is_err());
        assert!(Observable::new("z", ObservableKind::BoundedEnergy, None, 0, 1.0).is_err());
        assert!(Observable::new("z", ObservableKind::BoundedEnergy, None, 1, 0.0).is_err());
    }

    #[test]
    fn default_dictionary_is_bounded_on_simulation() {
        let t = noisy();
        let defs = default_dictionary();
        assert_eq!(defs.len(), 8);
        for d in &defs {
            let obs = Observable::from_def(d, t.grid()).unwrap();
            for v in obs.series(&t).unwrap() {
                assert!(v.abs() <= 1.0);
            }
            let avg = kb_average(&t, &obs, 1.0).unwrap();
            assert!(avg.abs() <= 1.0);
        }
    }

    #[test]
    fn ergodic_dispersion_requires_two() {
        let t = constant(5);
        assert!(ergodic_dispersion(&[t], &energy_obs(1.0), 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gap_bound_holds_on_random_frozen_trajectories(
            amps in proptest::collection::vec(0.0f64..0.4, 20..60),
            k in 0usize..8,
            terms in 1usize..20,
        ) {
            let g = grid();
            let states: Vec<FluidState> = amps.iter().map(|&a| FluidState::perturbed(&g, 0.5, a, 2, a)).collect();
            let t = frozen(states, 0.5);
            let obs = energy_obs(0.4);
            prop_assume!(terms + k < t.len());
            let s = terms as f64 * 0.5;
            let tau = k as f64 * 0.5;
            let gap = stationarity_gap(&t, &obs, tau, s).unwrap();
            let sup = obs.series(&t).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(gap <= 2.0 * tau / s * sup + 1e-15);
        }
    }
}
