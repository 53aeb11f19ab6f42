//! Closed-form free-space diffusion around a point source.
//!
//! The receiver is ignored here: these are the fields a transmitter would
//! produce in an unbounded medium.

use std::f64::consts::PI;

use crate::config::BOLTZMANN;
use crate::error::ModelError;

/// Stokes–Einstein diffusion coefficient `K_b T / (6 π η r)`, m²/s.
pub fn diffusion_coefficient(temperature: f64, viscosity: f64, radius: f64) -> Result<f64, ModelError> {
    if !(temperature > 0.0 && viscosity > 0.0 && radius > 0.0) {
        return Err(ModelError::domain(format!(
            "diffusion coefficient needs positive T, η, r (got {temperature}, {viscosity}, {radius})"
        )));
    }
    Ok(BOLTZMANN * temperature / (6.0 * PI * viscosity * radius))
}

/// Concentration at distance `r` and time `t` after an impulse of `q`
/// molecules released at the origin, molecules/m³.
pub fn impulse_concentration(q: f64, t: f64, r: f64, diffusivity: f64) -> Result<f64, ModelError> {
    if !(t > 0.0) {
        return Err(ModelError::domain(format!("impulse response needs t > 0, got {t}")));
    }
    if !(diffusivity > 0.0) {
        return Err(ModelError::domain("diffusivity must be positive"));
    }
    Ok(impulse_unchecked(q, t, r, diffusivity))
}

#[inline]
fn impulse_unchecked(q: f64, t: f64, r: f64, diffusivity: f64) -> f64 {
    let spread = 4.0 * diffusivity * t;
    q / (PI * spread).powf(1.5) * (-r * r / spread).exp()
}

/// Concentration of a burst train: `q` molecules every `period` seconds,
/// first burst at `t = period`. Exact finite sum over the bursts released so
/// far; zero before the first burst.
pub fn train_concentration(q: f64, period: f64, t: f64, r: f64, diffusivity: f64) -> Result<f64, ModelError> {
    if !(t > 0.0 && period > 0.0) {
        return Err(ModelError::domain(format!(
            "burst train needs t > 0 and period > 0 (got t = {t}, period = {period})"
        )));
    }
    if !(diffusivity > 0.0) {
        return Err(ModelError::domain("diffusivity must be positive"));
    }
    let bursts = (t / period).floor() as u64;
    // Sum from the oldest burst to the newest so the small terms go first.
    let mut total = 0.0;
    for i in 1..=bursts {
        let age = t - i as f64 * period;
        if age > 0.0 {
            total += impulse_unchecked(q, age, r, diffusivity);
        }
    }
    Ok(total)
}

/// Long-time limit of [`train_concentration`]: `q / (period · 4π D r)`.
pub fn steady_concentration(q: f64, period: f64, r: f64, diffusivity: f64) -> Result<f64, ModelError> {
    if !(r > 0.0) {
        return Err(ModelError::domain(format!("steady field undefined at r = {r}")));
    }
    if !(period > 0.0 && diffusivity > 0.0) {
        return Err(ModelError::domain("period and diffusivity must be positive"));
    }
    Ok(q / (period * 4.0 * PI * diffusivity * r))
}

/// A burst-train source in an unbounded medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationField {
    pub diffusivity: f64,
    pub burst_size: f64,
    pub period: f64,
}

impl ConcentrationField {
    pub fn source_rate(&self) -> f64 {
        self.burst_size / self.period
    }

    /// Field at time `t`, distance `r`. Zero before the first burst.
    pub fn at(&self, t: f64, r: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        train_concentration(self.burst_size, self.period, t, r, self.diffusivity).unwrap_or(0.0)
    }

    pub fn steady(&self, r: f64) -> Result<f64, ModelError> {
        steady_concentration(self.burst_size, self.period, r, self.diffusivity)
    }
}
