use crate::{Error, Result};

/// Solution envelope of `F′ ≤ −D F + C`:
/// `F(t) ≤ e^{−Dt} (F(0) − C/D) + C/D`.
pub fn gronwall_bound(f0: f64, c: f64, d: f64, t: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("decay rate must be > 0, got {d}")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    let fixed = c / d;
    Ok((-d * t).exp() * (f0 - fixed) + fixed)
}

/// Closed-form supersolution of `D′ + θ Dʳ ≤ 0`:
/// `(D0^{1−r} + θ (r − 1) t)^{−1/(r−1)}`, and `0` when `D0 = 0`.
pub fn defect_decay_envelope(d0: f64, theta: f64, r: f64, t: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::domain(format!("exponent r must be > 1, got {r}")));
    }
    if !(d0 >= 0.0 && theta > 0.0 && t >= 0.0) {
        return Err(Error::domain(format!(
            "need D0 >= 0, theta > 0, t >= 0 (got {d0}, {theta}, {t})"
        )));
    }
    if d0 == 0.0 {
        return Ok(0.0);
    }
    Ok((d0.powf(1.0 - r) + theta * (r - 1.0) * t).powf(-1.0 / (r - 1.0)))
}
