use serde::Serialize;

use crate::solver::Trajectory;
use crate::{Error, Result};

/// Ensemble estimate of `E[ℰ(t)^m]` on the common snapshot grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub order: u32,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean; NaN when the ensemble has one member.
    pub stderr: Vec<f64>,
    pub ensemble_size: usize,
}

impl MomentSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Built from per-member samples `samples[member][time]`.
    pub fn from_samples(order: u32, times: Vec<f64>, samples: &[Vec<f64>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("moment series needs at least one member"));
        }
        if samples.iter().any(|s| s.len() != times.len()) {
            return Err(Error::domain("ensemble members have different time grids"));
        }
        let n = samples.len();
        let nf = n as f64;
        let mut mean = vec![0.0; times.len()];
        let mut stderr = vec![f64::NAN; times.len()];
        for j in 0..times.len() {
            // members are summed in index order, so the result does not
            // depend on how the ensemble was scheduled
            let m = samples.iter().map(|s| s[j]).sum::<f64>() / nf;
            mean[j] = m;
            if n >= 2 {
                let var = samples.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / (nf - 1.0);
                stderr[j] = (var / nf).sqrt();
            }
        }
        Ok(MomentSeries {
            order,
            times,
            mean,
            stderr,
            ensemble_size: n,
        })
    }
}

/// `E[ℰ^m]` over an ensemble; all members must share the snapshot grid.
pub fn moment_series(ensemble: &[Trajectory], order: u32) -> Result<MomentSeries> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::domain("moment series needs at least one trajectory"))?;
    let len = first.len();
    if ensemble.iter().any(|t| t.len() != len || t.stride() != first.stride()) {
        return Err(Error::domain("trajectories have different snapshot grids"));
    }
    let times = (0..len).map(|j| first.time(j)).collect();
    let samples: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|t| t.energies().map(|e| e.total.powi(order as i32)).collect())
        .collect();
    MomentSeries::from_samples(order, times, &samples)
}

/// Ensemble mean of `max_j ℰ(t_j)^m` and its standard error. A diagnostic
/// of the supremum-in-time moment; no threshold is attached to it.
pub fn sup_moment(ensemble: &[Trajectory], order: u32) -> Result<(f64, f64)> {
    if ensemble.is_empty() {
        return Err(Error::domain("empty ensemble"));
    }
    let sups: Vec<f64> = ensemble
        .iter()
        .map(|t| {
            t.energies()
                .map(|e| e.total.powi(order as i32))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let s = MomentSeries::from_samples(order, vec![0.0], &sups.iter().map(|v| vec![*v]).collect::<Vec<_>>())?;
    Ok((s.mean[0], s.stderr[0]))
}

/// Outcome of [`envelope_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeVerdict {
    pub pass: bool,
    /// Smallest `bound + 2·stderr − mean` over the grid.
    pub worst_margin: f64,
    pub worst_time: f64,
    /// Times at which the margin is negative.
    pub violations: Vec<f64>,
}

/// Checks `mean(t) ≤ e^{−D t} (mean(0) + c1) + c2 + 2 stderr(t)` at every
/// grid time. Missing standard errors count as zero.
pub fn envelope_check(series: &MomentSeries, d_m: f64, c1: f64, c2: f64) -> Result<EnvelopeVerdict> {
    if series.is_empty() {
        return Err(Error::domain("empty moment series"));
    }
    if !(d_m > 0.0) {
        return Err(Error::domain(format!("decay rate must be > 0, got {d_m}")));
    }
    let head = series.mean[0] + c1;
    let mut verdict = EnvelopeVerdict {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_time: series.times[0],
        violations: Vec::new(),
    };
    for j in 0..series.len() {
        let t = series.times[j];
        let se = if series.stderr[j].is_nan() { 0.0 } else { series.stderr[j] };
        let bound = (-d_m * (t - series.times[0])).exp() * head + c2;
        let margin = bound + 2.0 * se - series.mean[j];
        if margin < verdict.worst_margin {
            verdict.worst_margin = margin;
            verdict.worst_time = t;
        }
        if margin < 0.0 {
            verdict.pass = false;
            verdict.violations.push(t);
        }
    }
    Ok(verdict)
}

/// Envelope constants `(D, c1, c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub d: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Fits envelope constants to calibration series:
///
/// * `c2 = (1 + safety) · max` of the means over the last quarter of each
///   series (the stationary level);
/// * `c1 = safety · max mean(0)`;
/// * `D = (1 − safety) · min_t −ln((mean(t) − c2)/(mean(0) + c1)) / t` over
///   the points still above `c2`.
///
/// Every calibration series then lies below its envelope.
pub fn fit_envelope(calibration: &[MomentSeries], safety: f64) -> Result<EnvelopeFit> {
    if calibration.is_empty() || calibration.iter().any(|s| s.len() < 2) {
        return Err(Error::domain("calibration needs series with at least two times"));
    }
    if !(0.0..1.0).contains(&safety) {
        return Err(Error::domain(format!("safety must lie in [0, 1), got {safety}")));
    }
    let mut level = f64::NEG_INFINITY;
    let mut head = f64::NEG_INFINITY;
    for s in calibration {
        let tail_start = s.len() - (s.len() / 4).max(1);
        level = level.max(s.mean[tail_start..].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        head = head.max(s.mean[0]);
    }
    let c2 = (1.0 + safety) * level;
    let c1 = safety * head;
    let mut d = f64::INFINITY;
    for s in calibration {
        for j in 1..s.len() {
            let t = s.times[j] - s.times[0];
            let excess = s.mean[j] - c2;
            if excess > 0.0 && t > 0.0 {
                d = d.min(-(excess / (s.mean[0] + c1)).ln() / t);
            }
        }
    }
    if !d.is_finite() {
        // nothing above the stationary level: any rate resolvable on the grid
        let s = &calibration[0];
        d = 10.0 / (s.times[1] - s.times[0]);
    }
    if !(d > 0.0) {
        return Err(Error::Numeric(format!(
            "calibration series do not decay toward c2 = {c2} (fitted rate {d})"
        )));
    }
    Ok(EnvelopeFit {
        d: (1.0 - safety) * d,
        c1,
        c2,
    })
}
